"""
Reading logs and removing abnormal users
========================================

Call logs are parsed into a columnar table. Bad rows are counted (or raise
in strict mode), aliases merge duplicate ids, and users with too many
distinct contacts (call centres, fraud) are dropped.
"""

import tempfile
from pathlib import Path

from migrantcdr.ingest import (ParseStats, filter_high_degree, load_call_table, parse_aliases,
                               parse_estates, parse_profiles, unique_contacts)
from migrantcdr.synth import GeneratorConfig, generate

d = Path(tempfile.mkdtemp())
bundle = generate(GeneratorConfig.from_dict({"n_locals": 1500, "n_staying": 150, "n_leaving": 30,
                                             "n_hubs": 3, "n_estates": 200, "alias_fraction": 0.02,
                                             "seed": 1}))
bundle.write(d)

# a malformed row is skipped and counted rather than crashing the load
with (d / "calls.csv").open("a") as fh:
    fh.write("x,y,not-a-time,0,0,0\n")
stats = ParseStats()
table = load_call_table(d / "calls.csv", stats=stats)
print("loaded", len(table), "calls;", stats.rejected, "rejected rows")

profiles = parse_profiles(d / "profiles.csv", home_region="SH")
estates = parse_estates(d / "estates.csv")
print(len(profiles), "profiles,", len(estates), "estates")

# alias map: secondary ids become their primary id
aliases = parse_aliases(d / "aliases.csv")
before = table.n_users
table, self_calls = table.with_aliases(aliases)
print(f"{len(aliases)} aliases: {before} -> {table.n_users} ids, {self_calls} self calls dropped")

# hubs have far more than 500 distinct contacts
deg = unique_contacts(table)
print("largest unique-contact counts:", sorted(deg.tolist())[-5:])
kept, removed = filter_high_degree(table, 500)
print("removed", len(removed), "users; kept", len(kept), "calls")
