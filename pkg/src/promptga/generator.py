"""Image synthesis backends and the content-addressed image store.

Two backends share one interface: a wire client for a remote txt2img
server (the fine-tuned artist model runs behind it), and an offline mock
whose output bytes are a pure function of (prompt text, seed). Images are
always persisted as PNG under ``{data_dir}/images/{sha256}.png``.
"""

from __future__ import annotations

import base64
import hashlib
import io
import os
import random
import struct
import tempfile
import threading
import time
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

import requests

from .genome import SEED_UPPER
from .promptgen import PromptString

MOCK_BACKEND_ID = "mock"
REMOTE_BACKEND_ID = "txt2img"

TXT2IMG_ROUTE = "/sdapi/v1/txt2img"

_PNG_MAGIC = b"\x89PNG\r\n\x1a\n"


class BackendUnreachableError(RuntimeError):
    """Connection or timeout failure with the retry budget exhausted."""


class BackendResponseError(RuntimeError):
    """The backend answered, but not with a usable image."""


class StoreIOError(OSError):
    pass


class GenerationBatchError(RuntimeError):
    """Every entry of a batch failed."""

    def __init__(self, errors: dict[int, str]):
        self.errors = errors
        super().__init__(f"all {len(errors)} generation requests failed")


@dataclass(frozen=True)
class GenerationParams:
    steps: int = 28
    guidance_scale: float = 7.0
    width: int = 512
    height: int = 512
    negative_prompt: str = ""

    def __post_init__(self) -> None:
        if not (1 <= self.steps <= 150):
            raise ValueError(f"steps must be in [1, 150], got {self.steps}")
        if self.guidance_scale <= 0:
            raise ValueError("guidance_scale must be positive")
        for side, label in ((self.width, "width"), (self.height, "height")):
            if side <= 0 or side % 8 != 0:
                raise ValueError(f"{label} must be a positive multiple of 8, got {side}")


@dataclass(frozen=True)
class ImageRef:
    content_hash: str
    format: str
    backend_id: str
    prompt_echo: PromptString
    seed: int


def params_to_dict(params: GenerationParams) -> dict:
    return {
        "steps": params.steps,
        "guidance_scale": params.guidance_scale,
        "width": params.width,
        "height": params.height,
        "negative_prompt": params.negative_prompt,
    }


def params_from_dict(doc: dict) -> GenerationParams:
    return GenerationParams(
        steps=int(doc.get("steps", 28)),
        guidance_scale=float(doc.get("guidance_scale", 7.0)),
        width=int(doc.get("width", 512)),
        height=int(doc.get("height", 512)),
        negative_prompt=str(doc.get("negative_prompt", "")),
    )


# -- content-addressed store ----------------------------------------------

class ContentStore:
    """Idempotent PNG store; files appear atomically, keyed by sha256."""

    def __init__(self, data_dir: str | Path):
        self.images_dir = Path(data_dir) / "images"
        self.images_dir.mkdir(parents=True, exist_ok=True)

    def path_for(self, content_hash: str) -> Path:
        return self.images_dir / f"{content_hash}.png"

    def has(self, content_hash: str) -> bool:
        return self.path_for(content_hash).is_file()

    def put(self, data: bytes) -> str:
        content_hash = hashlib.sha256(data).hexdigest()
        target = self.path_for(content_hash)
        if target.is_file():
            return content_hash
        try:
            fd, tmp = tempfile.mkstemp(dir=self.images_dir, suffix=".tmp")
            with os.fdopen(fd, "wb") as fh:
                fh.write(data)
            os.replace(tmp, target)
        except OSError as exc:
            raise StoreIOError(f"cannot persist image: {exc}") from exc
        return content_hash


# -- deterministic PNG encoding (mock backend) ------------------------------

def _png_chunk(tag: bytes, data: bytes) -> bytes:
    return (struct.pack(">I", len(data)) + tag + data
            + struct.pack(">I", zlib.crc32(tag + data) & 0xFFFFFFFF))


def encode_png_rgb(width: int, height: int, pixels: bytes) -> bytes:
    """Encode raw RGB bytes as a PNG (fixed filter and compression)."""
    if len(pixels) != width * height * 3:
        raise ValueError("pixel buffer size mismatch")
    stride = width * 3
    raw = b"".join(b"\x00" + pixels[y * stride:(y + 1) * stride] for y in range(height))
    ihdr = struct.pack(">IIBBBBB", width, height, 8, 2, 0, 0, 0)
    return (_PNG_MAGIC
            + _png_chunk(b"IHDR", ihdr)
            + _png_chunk(b"IDAT", zlib.compress(raw, 9))
            + _png_chunk(b"IEND", b""))


MOCK_IMAGE_SIDE = 96
_MOCK_BLOCK = 12


class MockBackend:
    """Offline stand-in: a fixed-size placeholder whose pixel pattern is a
    pure function of a digest of (prompt text, seed)."""

    backend_id = MOCK_BACKEND_ID

    def render_bytes(self, prompt: PromptString, seed: int,
                     params: GenerationParams) -> bytes:
        digest = hashlib.sha256(f"{prompt.text}\n{seed}".encode("utf-8")).digest()
        rng = random.Random(int.from_bytes(digest, "big"))
        side = MOCK_IMAGE_SIDE
        blocks = side // _MOCK_BLOCK
        palette = [(rng.randrange(256), rng.randrange(256), rng.randrange(256))
                   for _ in range(blocks * blocks)]
        rows = bytearray()
        for y in range(side):
            for x in range(side):
                r, g, b = palette[(y // _MOCK_BLOCK) * blocks + (x // _MOCK_BLOCK)]
                rows.extend((r, g, b))
        return encode_png_rgb(side, side, bytes(rows))


class RemoteBackend:
    """Client for the community txt2img HTTP convention.

    Failures are retried up to `retries` times with exponential backoff
    before raising; transport failures surface as BackendUnreachableError,
    bad answers as BackendResponseError with the body echoed.
    """

    backend_id = REMOTE_BACKEND_ID

    def __init__(self, base_url: str, timeout: float = 120.0, retries: int = 2,
                 backoff: float = 0.5):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.retries = retries
        self.backoff = backoff
        # requests.Session is not thread-safe; batch generation fans out
        self._local = threading.local()

    @property
    def _session(self) -> requests.Session:
        session = getattr(self._local, "session", None)
        if session is None:
            session = requests.Session()
            self._local.session = session
        return session

    def render_bytes(self, prompt: PromptString, seed: int,
                     params: GenerationParams) -> bytes:
        body = {
            "prompt": prompt.text,
            "negative_prompt": prompt.negative_text or params.negative_prompt,
            "seed": seed,
            "steps": params.steps,
            "cfg_scale": params.guidance_scale,
            "width": params.width,
            "height": params.height,
        }
        url = self.base_url + TXT2IMG_ROUTE
        last_error: Exception | None = None
        for attempt in range(self.retries + 1):
            if attempt > 0:
                time.sleep(self.backoff * (2 ** (attempt - 1)))
            try:
                response = self._session.post(url, json=body, timeout=self.timeout)
            except (requests.ConnectionError, requests.Timeout) as exc:
                last_error = BackendUnreachableError(f"{url}: {exc}")
                continue
            if response.status_code // 100 != 2:
                last_error = BackendResponseError(
                    f"{url}: HTTP {response.status_code}: {response.text[:500]}")
                continue
            try:
                images = response.json()["images"]
                payload = images[0]
            except (ValueError, KeyError, IndexError) as exc:
                last_error = BackendResponseError(f"{url}: malformed response: {exc}")
                continue
            data = base64.b64decode(payload.split(",", 1)[-1])
            return _ensure_png(data)
        assert last_error is not None
        raise last_error


def _ensure_png(data: bytes) -> bytes:
    if data.startswith(_PNG_MAGIC):
        return data
    from PIL import Image  # deferred: only non-PNG returns need transcoding

    try:
        image = Image.open(io.BytesIO(data))
        buffer = io.BytesIO()
        image.save(buffer, format="PNG")
    except Exception as exc:
        raise BackendResponseError(f"backend returned undecodable image data: {exc}") from exc
    return buffer.getvalue()


class Backend(Protocol):
    backend_id: str

    def render_bytes(self, prompt: PromptString, seed: int,
                     params: GenerationParams) -> bytes: ...


# -- generation entry points ------------------------------------------------

def generate(backend: Backend, store: ContentStore, prompt: PromptString,
             seed: int, params: GenerationParams) -> ImageRef:
    """Render one prompt, persist the PNG, return its reference."""
    if not (0 <= seed < SEED_UPPER):
        raise ValueError(f"seed {seed} outside [0, {SEED_UPPER})")
    data = backend.render_bytes(prompt, seed, params)
    content_hash = store.put(data)
    return ImageRef(
        content_hash=content_hash,
        format="png",
        backend_id=backend.backend_id,
        prompt_echo=prompt,
        seed=seed,
    )


@dataclass
class BatchResult:
    refs: list[ImageRef | None]
    errors: dict[int, str]

    @property
    def ok(self) -> bool:
        return not self.errors


def generate_population(backend: Backend, store: ContentStore,
                        items: Sequence[tuple[PromptString, int]],
                        params: GenerationParams,
                        parallelism: int = 4) -> BatchResult:
    """One image per (prompt, seed), order-preserving, bounded fan-out.

    Individual failures are reported per index; the batch raises only when
    every entry failed.
    """
    if not items:
        raise ValueError("empty generation batch")
    if parallelism < 1:
        raise ValueError("parallelism must be positive")

    refs: list[ImageRef | None] = [None] * len(items)
    errors: dict[int, str] = {}

    def work(index: int) -> None:
        prompt, seed = items[index]
        try:
            refs[index] = generate(backend, store, prompt, seed, params)
        except Exception as exc:
            errors[index] = str(exc)

    with ThreadPoolExecutor(max_workers=parallelism) as pool:
        list(pool.map(work, range(len(items))))

    if len(errors) == len(items):
        raise GenerationBatchError(errors)
    return BatchResult(refs=refs, errors=errors)
