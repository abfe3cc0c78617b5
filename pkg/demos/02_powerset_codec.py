"""
Powerset classes: who-is-talking as a single label
==================================================

Instead of four independent on/off decisions per frame, the segmenter
classifies each frame into one of eleven classes: silence, one of four
single speakers, or one of six speaker pairs.  Overlap beyond two
simultaneous speakers is not representable, by design.
"""

import numpy as np

from diarpipe import build_codec, to_multilabel

codec = build_codec(n_speakers=4, max_overlap=2)
print("number of classes:", codec.n_classes)

# the inventory, ordered by cardinality then lexicographically
for idx, cls in enumerate(codec.classes):
    print(f"  class {idx}: speakers {sorted(cls) or 'none'}")

print("encode({0,1}) ->", codec.encode({0, 1}))
print("decode(5)     ->", sorted(codec.decode(5)))

# scores are log probabilities over classes; argmax rows become
# per-slot binary activity through the codec's mapping matrix
scores = np.log(np.full((3, codec.n_classes), 0.01))
scores[0, 0] = np.log(0.90)  # silence
scores[1, 2] = np.log(0.90)  # speaker 1 alone
scores[2, 5] = np.log(0.90)  # speakers 0 and 1 together
multilabel = to_multilabel(scores, codec)
print("decoded activity per frame (rows) and slot (cols):")
print(multilabel)
