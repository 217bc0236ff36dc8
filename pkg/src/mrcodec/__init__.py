"""mrcodec: a learned image codec with a receiver-side realism knob.

One encoder produces one bitstream per image; the conditional generator
decodes it anywhere on the distortion-realism spectrum chosen at decode
time.
"""

__version__ = "0.1.0"
