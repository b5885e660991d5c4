"""
Labelling locals, staying and leaving migrants
==============================================

A user whose birth province is the host region is a local. Everyone else is
judged by the days they are active: silent during the warm-up, active in
weeks 1 and 2, and then either active in week 3 (staying) or silent
(leaving). Anything else is excluded.
"""

from collections import Counter

from migrantcdr.cohort import CohortConfig, classify, label_users
from migrantcdr.core import CallRecord, Sex, UserProfile

DAY = 86400
cfg = CohortConfig()
print("warm-up", cfg.warmup_days, "days; weeks", cfg.week1, cfg.week2, cfg.week3)

# the rule as a truth table over (local, warm-up, week1, week2, week3)
print(classify(False, False, True, True, True).value)   # StayingMigrant
print(classify(False, False, True, True, False).value)  # LeavingMigrant
print(classify(False, True, True, True, True).value)    # Excluded: seen in warm-up

# three users calling a local on chosen days
days = {"stay": [5, 12, 19], "leave": [6, 13], "early": [1, 6, 13, 20]}
calls = [CallRecord(u, "home", d * DAY, d * DAY + 60, 31.2, 121.4)
         for u, ds in days.items() for d in ds]
profiles = {u: UserProfile(u, 1990, Sex.M, "AH", False) for u in days}
profiles["home"] = UserProfile("home", 1980, Sex.F, "SH", True)
labels = label_users(calls, profiles, cfg)
for u, lab in sorted(labels.items()):
    print(f"{u:6s} {lab.value}")
print(Counter(l.value for l in labels.values()))
