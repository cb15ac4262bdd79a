import threading
from abc import ABC, abstractmethod
from typing import Any, Dict, Optional, Type

import numpy as np

from src.errors import InvalidConfig, ShapeMismatch
from src.scheduler.schedule import LatentBlock, sigma


class DenoiserStub(ABC):
    """Single-step flow predictor: (history, current, conditioning) -> flow for current.

    Implementations must be deterministic. The call counter is the only
    mutable state and is guarded so one instance can serve concurrent calls.
    """
    name = "abstract"

    def __init__(self):
        self._lock = threading.Lock()
        self.calls = 0

    def __call__(self, history: LatentBlock, current: LatentBlock, conditioning: Any = None) -> np.ndarray:
        if history.frames and history.channels != current.channels:
            raise ShapeMismatch(f"History has {history.channels} channels, current has {current.channels}")
        with self._lock:
            self.calls += 1
        flow = np.asarray(self.predict(history, current, conditioning), dtype=np.float64)
        if flow.shape != current.values.shape:
            raise ShapeMismatch(f"Denoiser '{self.name}' returned {flow.shape}, expected {current.values.shape}")
        return flow

    @abstractmethod
    def predict(self, history: LatentBlock, current: LatentBlock, conditioning: Any) -> np.ndarray:
        ...


class ZeroDenoiser(DenoiserStub):
    name = "zero"

    def predict(self, history, current, conditioning):
        return np.zeros_like(current.values)


class LinearDenoiser(DenoiserStub):
    """v(h, c) = mean over history frames + c"""
    name = "linear"

    def predict(self, history, current, conditioning):
        if history.frames == 0:
            return current.values.copy()
        return history.values.mean(axis=0) + current.values


class GaussianToyDenoiser(DenoiserStub):
    """Exact flow for data x_0 ~ N(mean, std^2) per channel, ignoring history.

    With x_s = (1 - s) x_0 + s eps the optimal velocity E[eps - x_0 | x_s]
    is affine in x_s.
    """
    name = "gaussian-toy"

    def __init__(self, mean: float = 0.0, std: float = 1.0):
        super().__init__()
        if std < 0:
            raise InvalidConfig(f"gaussian-toy std must be >= 0, got {std}")
        self.mean = float(mean)
        self.std = float(std)

    def coefficients(self, level: float):
        """(alpha, beta) such that v = alpha * x + beta at this noise level"""
        s = sigma(level)
        variance = (1.0 - s) ** 2 * self.std ** 2 + s ** 2
        if variance == 0.0:
            raise InvalidConfig("gaussian-toy velocity is undefined for a point mass at level 0")
        alpha = (s - (1.0 - s) * self.std ** 2) / variance
        beta = -alpha * (1.0 - s) * self.mean - self.mean
        return alpha, beta

    def predict(self, history, current, conditioning):
        alpha, beta = self.coefficients(current.noise_level)
        return alpha * current.values + beta


DENOISER_REGISTRY: Dict[str, Type[DenoiserStub]] = {
    ZeroDenoiser.name: ZeroDenoiser,
    LinearDenoiser.name: LinearDenoiser,
    GaussianToyDenoiser.name: GaussianToyDenoiser,
}


def create_denoiser(name: str, params: Optional[Dict[str, Any]] = None) -> DenoiserStub:
    try:
        factory = DENOISER_REGISTRY[name]
    except KeyError:
        raise InvalidConfig(f"Unknown denoiser '{name}', choose from {sorted(DENOISER_REGISTRY)}")
    return factory(**(params or {}))
