from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

log = logging.getLogger(__name__)

LEGF_MAGIC = b"LEGF"
LEGF_VERSION = 1
CLIP_TOKEN_LIMIT = 77

# phrases -> (n, D) float array
TextEncoder = Callable[[Sequence[str]], np.ndarray]
# HxWx3 uint8 image -> (h, w, D) patch features
ImageEncoder = Callable[[np.ndarray], np.ndarray]
# phrase -> token count including start/end tokens
TokenCounter = Callable[[str], int]


class ExportError(RuntimeError):
    pass


class PhraseTooLongError(ExportError):
    def __init__(self, phrases: dict[str, int]):
        self.phrases = phrases
        listing = ", ".join(f"{p!r} ({n} tokens)" for p, n in phrases.items())
        super().__init__(f"phrases exceed the {CLIP_TOKEN_LIMIT}-token encoder limit: {listing}")


@dataclass
class ExportManifest:
    model: str = "openai/clip-vit-base-patch32"
    phrase_source: Path | None = None
    table_out: Path | None = None
    grid_out: Path | None = None
    normalize: bool = True
    extra: dict = field(default_factory=dict)


def load_phrases(path: Path) -> list[str]:
    """One phrase per line, UTF-8. Blank lines are skipped, duplicates dropped with a warning."""
    lines = [ln.strip() for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    return _dedupe([ln for ln in lines if ln])


def _dedupe(phrases: Sequence[str]) -> list[str]:
    seen: set[str] = set()
    out = []
    for p in phrases:
        if p in seen:
            log.warning("duplicate phrase %r dropped", p)
            continue
        seen.add(p)
        out.append(p)
    return out


def _hf_clip(model: str):
    # Imported lazily so the format helpers work without torch/transformers.
    import torch
    from transformers import CLIPModel, CLIPProcessor

    net = CLIPModel.from_pretrained(model, local_files_only=True).eval()
    proc = CLIPProcessor.from_pretrained(model, local_files_only=True)

    def encode_text(phrases: Sequence[str]) -> np.ndarray:
        with torch.no_grad():
            tok = proc(text=list(phrases), return_tensors="pt", padding=True)
            return net.get_text_features(**tok).numpy().astype(np.float64)

    def count_tokens(phrase: str) -> int:
        return len(proc.tokenizer(phrase)["input_ids"])

    def encode_image(image: np.ndarray) -> np.ndarray:
        with torch.no_grad():
            pix = proc(images=image, return_tensors="pt")["pixel_values"]
            hidden = net.vision_model(pixel_values=pix).last_hidden_state[0, 1:]  # drop CLS
            tokens = net.visual_projection(net.vision_model.post_layernorm(hidden)).numpy()
        side = int(round(np.sqrt(tokens.shape[0])))
        return tokens.reshape(side, side, -1).astype(np.float64)

    return encode_text, count_tokens, encode_image


def _write_json(path: Path | None, doc: dict) -> None:
    if path is not None:
        Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")


def export_text_embeddings(
    phrases: Sequence[str],
    manifest: ExportManifest,
    encoder: TextEncoder | None = None,
    count_tokens: TokenCounter | None = None,
) -> dict:
    """Embedding table document (and file, if manifest.table_out is set) with unit-norm vectors."""
    phrases = _dedupe(phrases)
    if not phrases:
        raise ExportError("no phrases to export")
    if encoder is None:
        try:
            encoder, count_tokens, _ = _hf_clip(manifest.model)
        except Exception as e:  # any load failure is reported the same way
            raise ExportError(f"cannot load model {manifest.model!r}: {e}") from e
    if count_tokens is not None:
        too_long = {p: n for p in phrases if (n := count_tokens(p)) > CLIP_TOKEN_LIMIT}
        if too_long:
            raise PhraseTooLongError(too_long)

    vecs = np.asarray(encoder(phrases), dtype=np.float64)
    if vecs.ndim != 2 or vecs.shape[0] != len(phrases):
        raise ExportError(f"encoder returned shape {vecs.shape} for {len(phrases)} phrases")
    norms = np.linalg.norm(vecs, axis=1, keepdims=True)
    if np.any(norms == 0) or not np.all(np.isfinite(vecs)):
        raise ExportError("encoder produced a zero or non-finite embedding")
    if manifest.normalize:
        vecs = vecs / norms
    doc = {
        "version": 1,
        "dim": int(vecs.shape[1]),
        "provenance": "exported",
        "entries": [{"phrase": p, "vector": [float(x) for x in v]} for p, v in zip(phrases, vecs)],
    }
    _write_json(manifest.table_out, doc)
    return doc


def write_legf(grid: np.ndarray) -> bytes:
    g = np.asarray(grid, dtype="<f4")
    if g.ndim != 3:
        raise ExportError("LEGF grids are height x width x depth")
    if not np.all(np.isfinite(g)):
        raise ExportError("LEGF grids must be finite")
    h, w, d = g.shape
    return LEGF_MAGIC + struct.pack("<4I", LEGF_VERSION, h, w, d) + g.tobytes(order="C")


def read_legf(data: bytes) -> np.ndarray:
    if data[:4] != LEGF_MAGIC or len(data) < 20:
        raise ExportError("not a LEGF file")
    version, h, w, d = struct.unpack("<4I", data[4:20])
    if version != LEGF_VERSION:
        raise ExportError(f"unsupported LEGF version {version}")
    if len(data) - 20 != 4 * h * w * d:
        raise ExportError("LEGF payload length does not match its header")
    return np.frombuffer(data, dtype="<f4", offset=20).reshape(h, w, d)


def _bilinear(patches: np.ndarray, height: int, width: int) -> np.ndarray:
    """Half-pixel-centred bilinear resize of an (h, w, D) grid."""
    ph, pw, _ = patches.shape

    def axis(n_out: int, n_in: int):
        x = (np.arange(n_out) + 0.5) * n_in / n_out - 0.5
        x = np.clip(x, 0, n_in - 1)
        lo = np.floor(x).astype(int)
        hi = np.minimum(lo + 1, n_in - 1)
        return lo, hi, x - lo

    y0, y1, fy = axis(height, ph)
    x0, x1, fx = axis(width, pw)
    top = patches[y0][:, x0] * (1 - fx)[None, :, None] + patches[y0][:, x1] * fx[None, :, None]
    bot = patches[y1][:, x0] * (1 - fx)[None, :, None] + patches[y1][:, x1] * fx[None, :, None]
    return top * (1 - fy)[:, None, None] + bot * fy[:, None, None]


def export_image_features(
    image: np.ndarray | Path,
    manifest: ExportManifest,
    encoder: ImageEncoder | None = None,
) -> np.ndarray:
    """Patch features upsampled to the pixel grid and unit-normalised per pixel."""
    if not isinstance(image, np.ndarray):
        try:
            from PIL import Image

            image = np.asarray(Image.open(image).convert("RGB"))
        except Exception as e:
            raise ExportError(f"cannot read image {image}: {e}") from e
    if image.ndim != 3 or image.shape[2] != 3:
        raise ExportError("expected an H x W x 3 image")
    if encoder is None:
        try:
            _, _, encoder = _hf_clip(manifest.model)
        except Exception as e:
            raise ExportError(f"cannot load model {manifest.model!r}: {e}") from e
    patches = np.asarray(encoder(image), dtype=np.float64)
    dense = _bilinear(patches, image.shape[0], image.shape[1])
    norms = np.linalg.norm(dense, axis=2, keepdims=True)
    dense = np.where(norms > 0, dense / np.where(norms > 0, norms, 1), 0.0)
    if manifest.grid_out is not None:
        Path(manifest.grid_out).write_bytes(write_legf(dense))
    return dense.astype(np.float32)
