"""Rank color reference candidates for a grayscale query.

The selector scores texture (feature means) and structure (feature
covariance) agreement over frozen backbone stages; a corpus that contains
the query itself ranks it first with score 1.0.
"""

import numpy as np
import torch

from photorevive import rgb_to_gray
from photorevive.refselect import ReferenceSelector

torch.manual_seed(0)
rng = np.random.default_rng(0)

corpus = {f"candidate_{i}": rng.uniform(0, 1, (64, 64, 3)) for i in range(5)}
query = rgb_to_gray(corpus["candidate_2"])

selector = ReferenceSelector(pretrained=False)
for r in selector.rank_references(query, corpus, k=5):
    print(f"rank {r.rank}: {r.corpus_id:14s} score {r.score:.6f}")
