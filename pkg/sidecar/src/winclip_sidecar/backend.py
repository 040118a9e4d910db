"""Scoring backends: a conformance echo used for protocol testing and a
WinCLIP zero-shot segmentation model loaded lazily at startup."""

import numpy as np

SUPPORTED_BACKBONES = {
    # identifier -> (open_clip model name, input resolution)
    "ViT-B/16+": ("ViT-B-16-plus-240", 240),
    "ViT-L/14": ("ViT-L-14", 224),
    "ViT-L/14-FARE2": ("ViT-L-14", 224),
}


class EchoBackend:
    """Returns the per-pixel channel mean of the input, bit-exact in float32.

    Exists so the protocol and client plumbing can be verified round-trip
    without model weights.
    """

    native_resolution = 0

    def score(self, img):
        return img.mean(axis=2, dtype=np.float32)


class WinClipBackend:
    """WinCLIP zero-shot anomaly segmentation for one object category.

    The model is loaded once at construction; scoring resizes the request
    image to the backbone resolution, runs inference deterministically, and
    min-max normalizes each map to [0, 1]. Raw scores are normalized per
    sample because rank metrics are invariant to it and the protocol promises
    maps in [0, 1].
    """

    def __init__(self, backbone, category, weights=None):
        if backbone not in SUPPORTED_BACKBONES:
            raise ValueError(
                f"unsupported backbone {backbone!r}; "
                f"choose from {sorted(SUPPORTED_BACKBONES)}"
            )
        model_name, resolution = SUPPORTED_BACKBONES[backbone]
        self.native_resolution = resolution
        self._category = category

        import torch
        from anomalib.models.image.winclip.torch_model import WinClipModel

        torch.manual_seed(0)
        self._torch = torch
        self._model = WinClipModel(class_name=category)
        if weights is not None:
            state = torch.load(weights, map_location="cpu")
            self._model.load_state_dict(state, strict=False)
        self._model.eval()

    def score(self, img):
        torch = self._torch
        with torch.inference_mode():
            x = torch.from_numpy(np.ascontiguousarray(img)).permute(2, 0, 1)[None]
            n = self.native_resolution
            x = torch.nn.functional.interpolate(
                x, size=(n, n), mode="bilinear", align_corners=False
            )
            _, maps = self._model(x)
            m = maps[0].detach().cpu().numpy().astype(np.float32)
        lo, hi = float(m.min()), float(m.max())
        if hi > lo:
            m = (m - lo) / (hi - lo)
        else:
            m = np.zeros_like(m)
        return m.astype(np.float32)


def make_backend(echo, backbone, category, weights):
    if echo:
        return EchoBackend()
    if category is None:
        raise ValueError("--category is required unless --echo is set")
    return WinClipBackend(backbone, category, weights)
