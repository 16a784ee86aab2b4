"""Fixed 256-entry RGB palettes for saliency heatmaps."""

from __future__ import annotations

import numpy as np

# Piecewise-linear purple -> magenta -> orange -> yellow ramp through five
# plasma-like anchors; stored literally so renders are bit-exact everywhere.
_PLASMA_HEX = (
    "0d08870f088811088812088914088916088a18088a19078b1b078b1d078c1f078c20078d"
    "22078d24078e26078e28078f29078f2b07902d07902f0791300691320692340692360693"
    "3806933906943b06943d06953f06954006964206974406974605984705984905994b0599"
    "4d059a4f059a50059b52059b54059c56059c57059d59059d5b059e5d049e5f049f60049f"
    "6204a06404a06604a16704a16904a26b04a26d04a36e04a37004a47204a57403a57603a6"
    "7703a67903a77b03a77d03a87e03a88004a78105a68206a68308a58409a4860aa3870ba3"
    "880ca2890da18b0ea08c0fa08d109f8e119e8f129d91139d92149c93159b94169a96189a"
    "971999981a98991b979a1c969c1d969d1e959e1f949f2093a12193a22292a32391a42490"
    "a52590a7268fa8288ea9298daa2a8dac2b8cad2c8bae2d8aaf2e8ab02f89b23088b33187"
    "b43287b53386b73485b83584b93684ba3883bb3982bd3a81be3b81bf3c80c03d7fc23e7e"
    "c33f7ec4407dc5417cc6427bc8437bc9447aca4579cb4678cc4878cd4977ce4a76ce4b75"
    "cf4d74d04e73d04f72d15071d25171d35370d3546fd4556ed5566dd5586cd6596bd75a6a"
    "d75b6ad85c69d95e68d95f67da6066db6165dc6364dc6463dd6562de6662de6761df6960"
    "e06a5fe06b5ee16c5de26e5ce26f5be3705be4715ae57259e57458e67557e77656e77755"
    "e87954e97a54e97b53ea7c52eb7d51eb7f50ec804fed814eed824dee844def854cf0864b"
    "f0874af18849f28a48f28b47f38c46f48d45f48f45f59044f69143f69242f79341f89540"
    "f89640f8983ff8993ff89b3ef79c3ef79e3df7a03df7a13cf7a33cf7a43bf7a63bf7a73a"
    "f6a93af6ab39f6ac39f6ae38f6af38f6b137f6b237f6b436f5b636f5b735f5b935f5ba34"
    "f5bc34f5bd33f5bf33f5c133f4c232f4c432f4c531f4c731f4c830f4ca30f4cc2ff4cd2f"
    "f3cf2ef3d02ef3d22df3d32df3d52cf3d62cf3d82bf3da2bf2db2af2dd2af2de29f2e029"
    "f2e128f2e328f2e527f2e627f1e826f1e926f1eb25f1ec25f1ee24f1f024f1f123f1f323"
    "f0f422f0f622f0f721f0f921"
)

PLASMA = np.frombuffer(bytes.fromhex(_PLASMA_HEX), dtype=np.uint8).reshape(256, 3)
GRAY = np.repeat(np.arange(256, dtype=np.uint8)[:, None], 3, axis=1)

PALETTES = {"plasma": PLASMA, "gray": GRAY}


def get_palette(name: str) -> np.ndarray:
    try:
        return PALETTES[name]
    except KeyError:
        raise ValueError(f"unknown palette {name!r}; choose from {sorted(PALETTES)}") from None
