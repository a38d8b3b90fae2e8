"""Colored status output shared by every command"""
import sys

from termcolor import colored

QUIET = False


def set_quiet(quiet: bool):
    global QUIET
    QUIET = quiet


def info(msg: str):
    if not QUIET:
        print(msg, flush=True)


def done(msg: str):
    if not QUIET:
        print(colored(msg, "green"), flush=True)


def summary(msg: str):
    if not QUIET:
        print(colored(msg, "blue", attrs=["bold"]), flush=True)


def warn(msg: str):
    if not QUIET:
        print(colored(msg, "yellow"), flush=True)


def fail(msg: str):
    # Failures always go out, quiet or not
    print(colored(msg, "red"), file=sys.stderr, flush=True)
