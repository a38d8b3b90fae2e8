"""Run nicknames: an adjective and a body of water, reproducible from a seed"""
import random

left = (
    "amber",
    "ancient",
    "brisk",
    "calm",
    "clear",
    "cold",
    "crisp",
    "deep",
    "drifting",
    "dusky",
    "eddying",
    "even",
    "faint",
    "gentle",
    "glassy",
    "gliding",
    "hidden",
    "hushed",
    "icy",
    "idle",
    "laminar",
    "level",
    "limpid",
    "lucid",
    "mild",
    "misty",
    "murky",
    "patient",
    "placid",
    "quiet",
    "rapid",
    "restless",
    "rippled",
    "serene",
    "shallow",
    "silent",
    "silver",
    "slow",
    "smooth",
    "steady",
    "still",
    "swirling",
    "tidal",
    "tranquil",
    "viscous",
    "wandering",
    "wavy",
    "winding",
)

right = (
    "bayou",
    "bight",
    "brook",
    "canal",
    "cascade",
    "channel",
    "cove",
    "creek",
    "current",
    "delta",
    "estuary",
    "falls",
    "fjord",
    "flume",
    "ford",
    "gulf",
    "harbor",
    "inlet",
    "lagoon",
    "lake",
    "loch",
    "marsh",
    "mere",
    "millrace",
    "narrows",
    "oxbow",
    "pond",
    "pool",
    "rapids",
    "reach",
    "rill",
    "river",
    "runnel",
    "shoal",
    "sound",
    "spring",
    "strait",
    "stream",
    "tarn",
    "tide",
    "torrent",
    "weir",
)


def get_random_name(seed=None) -> str:
    """adjective_water; the same seed always gives the same name."""
    rng = random.Random(seed)
    return f"{rng.choice(left)}_{rng.choice(right)}"
