"""Reusable benchmark specs covering the five query archetypes.

Each spec scripts a stream whose pattern content is unambiguous: windows
either contain the queried pattern wholly or not at all, so a noise-free
engine must reach F = 1 exactly.
"""

from __future__ import annotations

from videocep.bench import BenchQuery, GroundTruthRule, KeySpec, ScriptEntry, StreamSpec

WINDOW = "WITHIN TIMEFRAME_WINDOW(10) WITH_CONFIDENCE > 0.5"


def object_archetype(fps=10.0, duration_s=40.0):
    stream = StreamSpec(
        fps=fps,
        duration_s=duration_s,
        background_count=(2, 3),
        script=[
            ScriptEntry(kind="burst", label="Car", start_s=2, end_s=6),
            ScriptEntry(kind="burst", label="Car", start_s=23, end_s=27),
        ],
    )
    query = BenchQuery(
        query_id="q1",
        veql=f"SELECT Object FROM Camera WHERE Object.label='Car' {WINDOW}",
        gt=GroundTruthRule(kind="OBJECT", keys=[KeySpec("Car")]),
    )
    return stream, [query]


def attribute_archetype(fps=10.0, duration_s=40.0):
    stream = StreamSpec(
        fps=fps,
        duration_s=duration_s,
        background_count=(2, 3),
        script=[
            ScriptEntry(kind="burst", label="Car", attributes={"color": "Black"}, start_s=3, end_s=7),
            ScriptEntry(kind="burst", label="Car", attributes={"color": "Red"}, start_s=12, end_s=16),
            ScriptEntry(kind="burst", label="Car", attributes={"color": "Black"}, start_s=31, end_s=36),
        ],
    )
    query = BenchQuery(
        query_id="q2",
        veql=(
            "SELECT Object FROM Camera WHERE Object.label='Car' "
            f"AND Object.attrcolor = 'Black' {WINDOW}"
        ),
        gt=GroundTruthRule(kind="OBJECT", keys=[KeySpec("Car", {"color": "Black"})]),
    )
    return stream, [query]


def spatial_archetype(fps=10.0, duration_s=40.0):
    stream = StreamSpec(
        fps=fps,
        duration_s=duration_s,
        background_count=(2, 3),
        script=[
            ScriptEntry(
                kind="pair",
                label="Car",
                attributes={"color": "Black"},
                reference_label="Car",
                reference_attributes={"color": "White"},
                start_s=4,
                end_s=8,
            ),
            ScriptEntry(
                kind="pair",
                label="Car",
                attributes={"color": "Black"},
                reference_label="Car",
                reference_attributes={"color": "Red"},
                start_s=25,
                end_s=29,
            ),
        ],
    )
    query = BenchQuery(
        query_id="q3",
        veql=(
            "SELECT Left(Object1, Object2) FROM Camera WHERE Object1.label= 'Car' AND "
            "Object1.attrcolor = 'Black' AND Object2.label = 'Car' AND "
            f"Object2.attrcolor = 'Not Black' {WINDOW}"
        ),
        gt=GroundTruthRule(
            kind="SPATIAL",
            keys=[KeySpec("Car", {"color": "Black"}), KeySpec("Car", {"color": "!Black"})],
            relation="LEFT",
        ),
    )
    return stream, [query]


def seq_archetype(fps=10.0, duration_s=60.0, operator="SEQ"):
    # disjoint presence intervals: Car strictly before Person inside the
    # pattern windows, Person before Car in a scripted negative window
    stream = StreamSpec(
        fps=fps,
        duration_s=duration_s,
        background_count=(1, 2),
        script=[
            ScriptEntry(kind="burst", label="Car", start_s=1, end_s=3),
            ScriptEntry(kind="burst", label="Person", start_s=5, end_s=8),
            # reversed order: person then car, never car-then-person
            ScriptEntry(kind="burst", label="Person", start_s=21, end_s=24),
            ScriptEntry(kind="burst", label="Car", start_s=26, end_s=29),
            # another positive window late in the stream
            ScriptEntry(kind="burst", label="Car", start_s=42, end_s=44),
            ScriptEntry(kind="burst", label="Person", start_s=46, end_s=48),
        ],
    )
    veql_op = {"SEQ": "SEQ", "EQ": "EQ", "CONJ": "CONJ", "DISJ": "DISJ"}[operator]
    query = BenchQuery(
        query_id=f"q4_{operator.lower()}",
        veql=(
            f"SELECT {veql_op}(Object1, Object2) FROM Camera WHERE Object1.label= 'Car' "
            f"AND Object2.label = 'Person' {WINDOW}"
        ),
        gt=GroundTruthRule(kind=operator, keys=[KeySpec("Car"), KeySpec("Person")]),
    )
    return stream, [query]


def count_archetype(fps=10.0, duration_s=40.0):
    stream = StreamSpec(
        fps=fps,
        duration_s=duration_s,
        background_count=(0, 0),
        script=[
            ScriptEntry(kind="count", label="Car", count=6, start_s=0, end_s=10),
            # a window where one stretch dips to 5 cars: universal fails
            ScriptEntry(kind="count", label="Car", count=6, start_s=20, end_s=25),
            ScriptEntry(kind="count", label="Car", count=5, start_s=25, end_s=30),
            ScriptEntry(kind="count", label="Car", count=7, start_s=30, end_s=40),
        ],
    )
    query = BenchQuery(
        query_id="q5",
        veql=(
            "SELECT HIGH_TRAFFIC_FLOW(Object) FROM Camera WHERE Object.label= 'Car' "
            f"AND COUNT(Object) > 5 FOR EACH FRAME {WINDOW}"
        ),
        gt=GroundTruthRule(
            kind="COUNT", keys=[KeySpec("Car")], cmp=">", value=5, per_frame=True
        ),
    )
    return stream, [query]


def all_archetypes():
    return {
        "object": object_archetype(),
        "attribute": attribute_archetype(),
        "spatial": spatial_archetype(),
        "seq": seq_archetype(),
        "count": count_archetype(),
    }
