"""Deterministic byte-level mock backend.

The mock makes the engine's behavioral claims testable without any ML
runtime.  Logits are a pure function of (seed, token sequence):

* by default they are seeded pseudorandom draws (high entropy);
* when a configured *trigger* byte string occurs in the prompt and the bytes
  generated since the last answer marker (``Answer:``) are a proper prefix
  of that trigger's answer string, the next answer byte gets a large logit
  boost, producing a low-entropy distribution that walks through the answer.

Per-layer projections divide the final logits by a per-layer sharpening
exponent (>= 1, non-increasing with depth), so earlier layers always have
higher entropy: the same qualitative shape real models show under the
logit lens.

``attention_window`` optionally limits trigger matching to the trailing N
bytes of the sequence, giving the mock a finite effective context: with a
window shorter than a concatenated multi-document prompt, an early document
is "forgotten" while the same document in a short per-document prompt is
not.  Position-sensitivity fixtures rely on this.
"""

import hashlib
import json
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

import numpy as np

from ..errors import ConfigurationError, InvalidTokenError
from . import Backend, BackendMeta, ForwardRequest, ForwardResponse

__all__ = ["MockTrigger", "MockModelSpec", "MockBackend"]


def _as_bytes(value, name: str) -> bytes:
    if isinstance(value, bytes):
        return value
    if isinstance(value, str):
        return value.encode("utf-8")
    raise ConfigurationError(f"{name} must be str or bytes, got {type(value).__name__}")


@dataclass(frozen=True)
class MockTrigger:
    """Prompt substring that makes the mock spell out ``answer`` byte by byte.

    End the answer with a newline to let the decoder's newline stop rule
    terminate generation cleanly.
    """

    trigger: bytes
    answer: bytes
    low_entropy_scale: float = 30.0

    def __post_init__(self):
        object.__setattr__(self, "trigger", _as_bytes(self.trigger, "trigger"))
        object.__setattr__(self, "answer", _as_bytes(self.answer, "answer"))
        if len(self.answer) == 0:
            raise ConfigurationError("trigger answer must be non-empty")
        if len(self.trigger) == 0:
            raise ConfigurationError("trigger string must be non-empty")
        if not self.low_entropy_scale > 0:
            raise ConfigurationError("low_entropy_scale must be > 0")


@dataclass(frozen=True)
class MockModelSpec:
    """Full description of a mock model; serializable to/from JSON."""

    vocab_size: int = 256
    num_layers: int = 8
    seed: int = 0
    triggers: tuple[MockTrigger, ...] = ()
    #: Per-layer logit divisors, one per layer, positive and non-increasing;
    #: None selects a linear ramp from ``head_sharpening`` down to 1.0.
    layer_sharpening: Optional[tuple[float, ...]] = None
    head_sharpening: float = 4.0
    max_context: int = 4096
    #: Trigger matching only sees the trailing this-many bytes; None = all.
    attention_window: Optional[int] = None
    answer_marker: bytes = b"Answer:"

    def __post_init__(self):
        if self.vocab_size < 2 or self.vocab_size > 2**20:
            raise ConfigurationError(f"bad vocab_size {self.vocab_size}")
        if self.num_layers < 1:
            raise ConfigurationError(f"bad num_layers {self.num_layers}")
        object.__setattr__(self, "triggers", tuple(self.triggers))
        object.__setattr__(self, "answer_marker", _as_bytes(self.answer_marker, "answer_marker"))
        if self.attention_window is not None and self.attention_window < 1:
            raise ConfigurationError("attention_window must be >= 1 when set")
        sharp = self.layer_sharpening
        if sharp is None:
            sharp = self._default_sharpening()
        sharp = tuple(float(s) for s in sharp)
        if len(sharp) != self.num_layers:
            raise ConfigurationError(
                f"layer_sharpening needs {self.num_layers} entries, got {len(sharp)}"
            )
        if any(s <= 0 for s in sharp):
            raise ConfigurationError("layer_sharpening entries must be > 0")
        if any(a < b for a, b in zip(sharp, sharp[1:])):
            raise ConfigurationError("layer_sharpening must be non-increasing with depth")
        object.__setattr__(self, "layer_sharpening", sharp)

    def _default_sharpening(self) -> tuple[float, ...]:
        top = float(self.head_sharpening)
        if top < 1.0:
            raise ConfigurationError("head_sharpening must be >= 1")
        if self.num_layers == 1:
            return (1.0,)
        span = self.num_layers - 1
        return tuple(1.0 + (top - 1.0) * (span - i) / span for i in range(self.num_layers))

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "num_layers": self.num_layers,
            "seed": self.seed,
            "triggers": [
                {
                    "trigger": t.trigger.decode("utf-8"),
                    "answer": t.answer.decode("utf-8"),
                    "low_entropy_scale": t.low_entropy_scale,
                }
                for t in self.triggers
            ],
            "layer_sharpening": list(self.layer_sharpening),
            "max_context": self.max_context,
            "attention_window": self.attention_window,
            "answer_marker": self.answer_marker.decode("utf-8"),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "MockModelSpec":
        kwargs = dict(d)
        triggers = [
            MockTrigger(t["trigger"], t["answer"], t.get("low_entropy_scale", 30.0))
            for t in kwargs.pop("triggers", [])
        ]
        if "layer_sharpening" in kwargs and kwargs["layer_sharpening"] is not None:
            kwargs["layer_sharpening"] = tuple(kwargs["layer_sharpening"])
        known = {
            "vocab_size", "num_layers", "seed", "layer_sharpening",
            "head_sharpening", "max_context", "attention_window", "answer_marker",
        }
        unknown = set(kwargs) - known
        if unknown:
            raise ConfigurationError(f"unknown mock spec fields: {sorted(unknown)}")
        return cls(triggers=tuple(triggers), **kwargs)

    @classmethod
    def from_json_file(cls, path) -> "MockModelSpec":
        with open(path, "r", encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))


class MockBackend(Backend):
    """Byte-level deterministic backend; pure, thread-safe, hermetic."""

    def __init__(self, spec: MockModelSpec = MockModelSpec(), seed: Optional[int] = None):
        self._spec = spec if seed is None else _respec_seed(spec, seed)
        self._meta = BackendMeta(
            vocab_size=self._spec.vocab_size,
            num_layers=self._spec.num_layers,
            max_context=self._spec.max_context,
            name=f"mock-byte[seed={self._spec.seed}]",
        )

    @property
    def spec(self) -> MockModelSpec:
        return self._spec

    def meta(self) -> BackendMeta:
        return self._meta

    def tokenize(self, text: str) -> list[int]:
        return list(text.encode("utf-8"))

    def detokenize(self, ids: Sequence[int]) -> str:
        data = bytes(self._check_ids(ids))
        return data.decode("utf-8", errors="replace")

    def forward(self, tokens: Sequence[int], layers: Iterable[int] = ()) -> ForwardResponse:
        req = ForwardRequest(tuple(int(t) for t in tokens), tuple(int(l) for l in layers))
        req.validate(self._meta)
        final = self._final_logits(req.tokens)
        per_layer = {
            l: final / self._spec.layer_sharpening[l - 1] for l in req.layers
        }
        return ForwardResponse(final=final, per_layer=per_layer)

    # -- internals ---------------------------------------------------------

    def _check_ids(self, ids: Sequence[int]) -> list[int]:
        out = []
        for t in ids:
            t = int(t)
            if not 0 <= t < 256:
                raise InvalidTokenError(f"byte token id {t} outside [0, 256)")
            out.append(t)
        return out

    def _final_logits(self, tokens: tuple[int, ...]) -> np.ndarray:
        base = self._base_logits(tokens)
        boost = self._trigger_boost(tokens)
        if boost is not None:
            token_id, scale = boost
            base[token_id] += scale
        return base

    def _base_logits(self, tokens: tuple[int, ...]) -> np.ndarray:
        # Stable across processes: derive the Philox key from a keyed hash of
        # the token bytes, never from Python's randomized hash().
        h = hashlib.blake2b(digest_size=16)
        h.update(self._spec.seed.to_bytes(8, "little", signed=True))
        h.update(np.asarray(tokens, dtype=np.uint32).tobytes())
        key = np.frombuffer(h.digest(), dtype=np.uint64)
        rng = np.random.Generator(np.random.Philox(key=key))
        return rng.standard_normal(self._spec.vocab_size)

    def _trigger_boost(self, tokens: tuple[int, ...]) -> Optional[tuple[int, float]]:
        """(token id, scale) for the next answer byte, or None."""
        if not self._spec.triggers:
            return None
        data = bytes(t & 0xFF for t in tokens)
        if self._spec.attention_window is not None:
            data = data[-self._spec.attention_window:]
        marker_at = data.rfind(self._spec.answer_marker)
        if marker_at < 0:
            return None
        context = data[: marker_at + len(self._spec.answer_marker)]
        generated = data[marker_at + len(self._spec.answer_marker):]
        # Of the triggers present in the visible context, the one occurring
        # last wins, like a recency-biased reader.
        best = None
        best_pos = -1
        for t in self._spec.triggers:
            pos = context.rfind(t.trigger)
            if pos > best_pos:
                best_pos = pos
                best = t
        if best is None:
            return None
        if len(generated) < len(best.answer) and best.answer.startswith(generated):
            return int(best.answer[len(generated)]), best.low_entropy_scale
        return None


def _respec_seed(spec: MockModelSpec, seed: int) -> MockModelSpec:
    d = spec.to_dict()
    d["seed"] = int(seed)
    return MockModelSpec.from_dict(d)
