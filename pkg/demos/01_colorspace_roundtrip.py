"""Convert an RGB image to Lab and back, and inspect the channel ranges.

The L channel is normalized to [0, 1] (L*/100) and the ab channels to
[-1, 1] (a*/128, b*/128), which is the representation every network in the
package consumes.
"""

import numpy as np

from photorevive import lab_to_rgb, rgb_to_lab

rng = np.random.default_rng(0)
rgb = rng.uniform(0, 1, (64, 64, 3))

lab = rgb_to_lab(rgb)
print(f"L  range: [{lab.L.min():.4f}, {lab.L.max():.4f}]  (normalized L*/100)")
print(f"ab range: [{lab.ab.min():.4f}, {lab.ab.max():.4f}] (normalized /128)")

back = lab_to_rgb(lab)
print(f"round-trip max error: {np.abs(back - rgb).max():.2e}")

# a pure red pixel reproduces the textbook CIE Lab coordinates
red = rgb_to_lab(np.array([[[1.0, 0.0, 0.0]]]))
print(f"pure red -> L*={red.L[0, 0] * 100:.2f}, "
      f"a*={red.ab[0, 0, 0] * 128:.2f}, b*={red.ab[0, 0, 1] * 128:.2f}")
