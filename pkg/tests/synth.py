"""Synthetic users with a planted right answer the toy provider can find.

Selection records put the gold movie title in the user's *first* interaction
(ancient history, so tail-truncation loses it) and give the toy provider a
keyword rule per gold title, so attention-guided selection recovers it at any
budget. Every ``echo_every``-th user also name-drops the gold title in the
summary of their *last* interaction, which is the only way truncation can
still answer — that puts its accuracy at exactly 1/echo_every.
"""

import json
import random

from attnpress import compose_context
from attnpress.providers import KeywordRule

GENRES = ("Action", "Comedy", "Drama", "Mystery", "Romance", "Sci-Fi", "Thriller")

GOLD_TITLES = (
    "The Amber Telescope", "Midnight Cartographer", "A Harvest of Echoes",
    "The Lantern Divide", "Orchard of Glass", "The Seventh Causeway",
    "Paper Boats at Dawn", "The Quiet Armada", "Winter's Ledger",
    "The Copper Aviary", "Songs for a Dry River", "The Borrowed Horizon",
    "Meridian Falls", "The Clockmaker's Debt", "A Field of Static",
    "The Salt Garden", "Last Train to Veldt", "The Unfinished Bridge",
    "Harbor of Small Hours", "The Glass Cartel", "Northern Ellipsis",
    "The Vanishing Chorus", "Ink and Anchor", "The Hollow Calendar",
    "Studies in Driftwood", "The Patient Mountain", "Relay at Blue Creek",
    "The Gilded Antenna", "Homecoming for Strangers", "The Paper Meridian",
)

DECOY_TITLES = (
    "Silver Cul-de-sac", "The Obsolete Comet", "Brunch of Champions",
    "The Velvet Turbine", "Duel at Low Tide", "The Reluctant Lighthouse",
    "Parade of Umbrellas", "The Second Stairwell", "Goodbye, Tangerine",
    "The Marble Orchard", "Afternoon of the Kite", "The Spare Key",
    "Thunder on a Budget", "The Polite Invasion", "Custard and Consequences",
    "The Wandering Decimal", "Nine Lives of Gregor", "The Painted Delay",
    "Sardines for Breakfast", "The Modest Labyrinth",
)


def selection_record(position: int, *, interactions: int = 8, echo_every: int = 5) -> dict:
    rng = random.Random(9_000 + position)
    gold = GOLD_TITLES[position % len(GOLD_TITLES)]
    decoys = rng.sample(DECOY_TITLES, 4)
    slot = rng.randrange(5)
    candidates = list(decoys)
    candidates.insert(slot, gold)
    echoes = echo_every and position % echo_every == echo_every - 1
    items = []
    for k in range(interactions):
        summary = f"A quiet story about errand {position}-{k} told plainly."
        if k == interactions - 1 and echoes:
            summary = f"A closing chapter that returns to {gold} for one last scene."
        items.append({
            "title": gold if k == 0 else f"Chronicle {position}-{k}",
            "year": 1980 + rng.randrange(40),
            "genres": sorted(rng.sample(GENRES, 2)),
            "summary": summary,
            "rating": rng.randint(1, 5),
            "rating_time": f"20{rng.randrange(10):02d}-{rng.randrange(1, 13):02d}-"
                           f"{rng.randrange(1, 29):02d} at 12:{rng.randrange(60):02d}:00",
        })
    return {
        "user_id": f"u{position:03d}",
        "basic_info": {
            "gender": rng.choice("MF"),
            "age": rng.choice(("18-24", "25-34", "35-44")),
            "occupation": rng.choice(("engineer", "teacher", "clerk")),
        },
        "interactions": items,
        "candidates": candidates,
        "gold_index": slot,
    }


def selection_records(num_users: int, **kwargs) -> list[dict]:
    return [selection_record(i, **kwargs) for i in range(num_users)]


def generation_record(position: int) -> dict:
    rng = random.Random(17_000 + position)
    gold = f"Adaptive Charts for Territory {position}"
    papers = [{
        "title": f"Notes on Region {position}-{k}",
        "abstract": f"We study region {position}-{k} in detail. "
                    f"Results held across {rng.randrange(3, 9)} trials.",
        "date": 2000 + rng.randrange(20),
    } for k in range(3)]
    return {
        "user_id": f"g{position:03d}",
        "papers": papers,
        "query_abstract": f"{gold} examined from first principles. "
                          "The method extends to neighboring territories.",
        "gold_title": gold,
    }


def generation_records(num_users: int) -> list[dict]:
    return [generation_record(i) for i in range(num_users)]


def write_jsonl(path, records):
    with open(path, "w", encoding="utf-8") as fh:
        for record in records:
            fh.write(json.dumps(record) + "\n")
    return path


def gold_rules(records, weight: float = 4.0) -> tuple[KeywordRule, ...]:
    """One boost rule per planted gold title (first interaction of each user)."""
    return tuple(
        KeywordRule(record["interactions"][0]["title"], weight) for record in records
    )


def rules_config(records, weight: float = 4.0) -> list[dict]:
    """The same rules as JSON config for CLI manifests."""
    return [
        {"keyword": record["interactions"][0]["title"], "weight": weight}
        for record in records
    ]


def planted_context(num_sentences: int = 20, user_id: str = "planted"):
    """A flat context of one-segment sentences, each holding a unique token."""
    parts = [
        (f"Note {i}: It mentions token{i:02d} briefly.", "note")
        for i in range(num_sentences)
    ]
    return compose_context(user_id, parts, "List the key notes.")


def planted_rules(indices, weight: float = 4.0) -> tuple[KeywordRule, ...]:
    return tuple(KeywordRule(f"token{i:02d}", weight) for i in indices)
