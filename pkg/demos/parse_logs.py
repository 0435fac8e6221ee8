"""From raw click-log lines to a two-action dataset.

Each line records a visit: timestamp, the article shown, whether it was
clicked, the user's features and the candidate pool.  Keeping only visits
that showed one of two chosen articles gives a binary-action log.
"""

from pathlib import Path

from softregret.ingest import ParseError, filter_binary, find_perfect_matches, parse_lines

fixture = Path(__file__).resolve().parent.parent / "tests" / "data" / "r6a_fixture.txt"
lines = fixture.read_text().splitlines() + [
    "1241160906 id-7 0 |user 1:1.0 2:0.5 |id-4 1:1.0 |id-7 1:1.0",  # same user as the first line
    "1241160999 id-4 maybe |user 1:1.0 |id-4",  # malformed click
]

events = []
for item in parse_lines(lines):
    if isinstance(item, ParseError):
        print(f"skipped: {item}")
    else:
        events.append(item)
print(f"parsed {len(events)} events")

ds = filter_binary(events, ("id-7", "id-4"))
print(f"kept {len(ds)} visits; id-4 is action 0 and id-7 is action 1 (lexicographic order)")
for w, x, y in zip(ds.w, ds.x, ds.y):
    print(f"  action {x}  click {y:.0f}  user {w.tolist()}")
print("same user shown both articles:", find_perfect_matches(ds))
