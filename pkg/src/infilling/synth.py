"""Deterministic synthetic story corpus.

Templated five-sentence stories with a title paragraph. Entity variables are
mentioned in several sentences on purpose: some are only recoverable from
text *before* a given sentence, some only from text *after* it, so infilling
quality genuinely depends on how much context a strategy can see.
"""

from __future__ import annotations

import json
import random

NAMES = ("Mia", "Leo", "Ada", "Finn", "Nora", "Eli", "June", "Omar", "Ivy",
         "Theo", "Rosa", "Kai")
COLORS = ("red", "blue", "green", "yellow", "purple", "silver")
OBJECTS = ("kite", "lantern", "wagon", "compass", "violin", "basket",
           "telescope", "umbrella", "drum", "map")
PLACES = ("river", "market", "school", "harbor", "garden", "bakery",
          "library", "meadow")
FRIENDS = ("neighbor", "teacher", "baker", "sailor", "farmer", "painter",
           "doctor", "tailor")
EVENTS = ("broke", "vanished", "glowed", "rattled", "sparkled", "toppled")
# mood is a function of the event, so the final sentence is predictable
# from the one before it (and vice versa)
MOOD_FOR_EVENT = {
    "broke": "upset",
    "vanished": "worried",
    "glowed": "amazed",
    "rattled": "nervous",
    "sparkled": "delighted",
    "toppled": "annoyed",
}
TIMES = ("morning", "afternoon", "evening", "night")


def make_story(rng: random.Random) -> str:
    name = rng.choice(NAMES)
    color = rng.choice(COLORS)
    obj = rng.choice(OBJECTS)
    place = rng.choice(PLACES)
    place2 = rng.choice([p for p in PLACES if p != place])
    friend = rng.choice(FRIENDS)
    event = rng.choice(EVENTS)
    mood = MOOD_FOR_EVENT[event]
    time = rng.choice(TIMES)
    title = f"{name} and the {color} {obj}."
    sentences = [
        f"{name} found a {color} {obj} near the {place}.",
        f"{name} took the {obj} to the {place2}.",
        f"A {friend} asked {name} about the {obj} at the {place}.",
        f"Later the {color} {obj} {event} at the {place2}.",
        f"{name} felt {mood} about the {obj} that {time}.",
    ]
    return title + "\n\n" + " ".join(sentences)


def generate_corpus(n_docs: int, seed: int = 0) -> list[str]:
    rng = random.Random(seed)
    return [make_story(rng) for _ in range(n_docs)]


def write_corpus(path, n_docs: int, seed: int = 0) -> None:
    """Write a jsonl corpus; the title is flagged as a metadata paragraph."""
    with open(path, "w", encoding="utf-8") as fh:
        for i, text in enumerate(generate_corpus(n_docs, seed)):
            fh.write(json.dumps({"id": f"synth-{seed}-{i}", "text": text,
                                 "has_meta": True}) + "\n")
