"""Physical parameters and the oscillation profile of the container."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import ConfigurationError


@dataclass(frozen=True)
class OscillationProfile:
    """A 1-periodic profile written as a truncated Fourier series.

    ``f(t) = cos[0] + sum_j cos[j] cos(2 pi j t) + sin[j] sin(2 pi j t)``,
    with ``sin[0]`` ignored.
    """

    cos: tuple = (0.0, 1.0)
    sin: tuple = (0.0, 0.0)

    def __post_init__(self):
        n = max(len(self.cos), len(self.sin))
        c = np.zeros(n)
        s = np.zeros(n)
        c[: len(self.cos)] = self.cos
        s[: len(self.sin)] = self.sin
        object.__setattr__(self, "cos", tuple(float(x) for x in c))
        object.__setattr__(self, "sin", tuple(float(x) for x in s))
        if not np.all(np.isfinite(c)) or not np.all(np.isfinite(s)):
            raise ConfigurationError("profile coefficients must be finite", "profile")
        if np.all(c[1:] == 0.0) and np.all(s[1:] == 0.0):
            raise ConfigurationError("profile must be non-constant", "profile")
        tt = np.linspace(0.0, 1.0, 4096, endpoint=False)
        if np.max(np.abs(self(tt))) > 1.0 + 1e-12:
            raise ConfigurationError("profile must satisfy max|f| <= 1", "profile")

    @classmethod
    def cosine(cls, delta=0.0):
        """The profile ``cos(2 pi t - delta)``."""
        return cls(cos=(0.0, np.cos(delta)), sin=(0.0, np.sin(delta)))

    def derivative(self, t, order=0):
        """``d^order f / dt^order`` at ``t`` (array-friendly)."""
        t = np.asarray(t, dtype=float)
        out = np.full(t.shape, self.cos[0] if order == 0 else 0.0)
        for j in range(1, len(self.cos)):
            w = 2.0 * np.pi * j
            ph = w * t + 0.5 * np.pi * order
            out = out + w**order * (self.cos[j] * np.cos(ph) + self.sin[j] * np.sin(ph))
        return out if out.ndim else float(out)

    def __call__(self, t):
        return self.derivative(t, 0)

    def shifted(self, s):
        """Profile ``t -> f(t + s)``."""
        c = list(self.cos)
        sn = list(self.sin)
        for j in range(1, len(c)):
            th = 2.0 * np.pi * j * s
            c[j], sn[j] = (
                self.cos[j] * np.cos(th) + self.sin[j] * np.sin(th),
                self.sin[j] * np.cos(th) - self.cos[j] * np.sin(th),
            )
        return OscillationProfile(cos=tuple(c), sin=tuple(sn))


@dataclass(frozen=True)
class Params:
    """Physical parameters of the oscillating-container problem.

    ``amp`` and ``omega`` are the oscillation amplitude and frequency; the
    bottom moves as ``amp * f(omega * t)``.
    """

    L1: float = 1.0
    L2: float = 1.0
    b: float = 1.0
    g: float = 1.0
    mu: float = 1.0
    sigma: float = 1.0
    amp: float = 0.0
    omega: float = 1.0
    profile: OscillationProfile = field(default_factory=OscillationProfile)

    def __post_init__(self):
        for name in ("L1", "L2", "b", "g", "mu", "omega"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v > 0):
                raise ConfigurationError(f"must be > 0, got {v!r}", f"params.{name}")
        for name in ("sigma", "amp"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ConfigurationError(f"must be >= 0, got {v!r}", f"params.{name}")

    @property
    def period(self):
        return 1.0 / self.omega

    def forcing_coefficient(self, t):
        """``A omega^2 f''(omega t)``: the parametric modulation of gravity."""
        return self.amp * self.omega**2 * self.profile.derivative(self.omega * t, 2)

    def with_(self, **kw):
        return replace(self, **kw)
