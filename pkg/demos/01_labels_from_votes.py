"""
Labels from annotator votes
===========================

Ten annotators vote on each sample. The votes can be collapsed to a
majority one-hot label or kept as a distribution over classes.
"""

import numpy as np

from labeldist.labels import (VoteRecord, distributional_label, majority_label, smooth_label,
                              tally_votes, vote_entropy, voter_confusion)

# Votes use 0-based class indices in the Python API.
record = VoteRecord("s1", "city-a", (2, 2, 2, 6, 2, 2, 6, 2, 2, 6))
counts = tally_votes(record, 10)
print("counts       ", counts)

# The majority label keeps only the winner; ties go to the lowest index.
maj = majority_label(counts)
print("majority     ", maj.label, "winner", maj.winner, "tied", maj.tied)
print("tie example  ", majority_label([5, 5, 0]).winner)

# The distributional label keeps the disagreement.
dist = distributional_label(counts)
print("distribution ", dist)

# Entropy in nats measures how much the annotators disagree.
print("entropy      ", vote_entropy(dist), "vs unanimous", vote_entropy(maj.label))

# Label smoothing mixes in a uniform share alpha / K.
print("smoothed     ", smooth_label(maj.label, 0.1))

# Voter-vs-majority confusion over a handful of records.
records = [record, VoteRecord("s2", "city-a", (6,) * 8 + (2, 2))]
cm = voter_confusion(records, 10)
print("confusion rows 3 and 7 (1-based):")
print(cm[[2, 6]][:, [2, 6]])
assert np.all(cm.sum(axis=1)[[2, 6]] == 10)
