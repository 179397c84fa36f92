"""Decay-kernel banks.

Each bank holds ``M`` basis kernels ``kappa_m(t)`` with closed-form
integrals ``K_m(t) = int_0^t kappa_m(s) ds``, exact parameter gradients of
both, and an upper bound of ``kappa_m`` over a time interval (used by the
thinning sampler).

All parameters are stored as float arrays of shape ``(M,)``; single-basis
kernels simply have ``M == 1``. Gradients are therefore "diagonal": the
gradient of basis ``m`` is taken with respect to entry ``m`` of each
parameter array.

Vectorised methods take an array ``t`` of any shape and return an array of
shape ``t.shape + (M,)``. Negative lags are clipped to zero internally; the
module-level helpers (:func:`kernel_value` etc.) reject them.
"""
from __future__ import annotations

import math

import numpy as np
from scipy.special import erf

_SQRT2 = math.sqrt(2.0)
_SQRT2PI = math.sqrt(2.0 * math.pi)
_TINY = 1e-12


class KernelBank:
    kind = "base"
    param_names: tuple = ()

    def __init__(self, trainable=False, **params):
        arrays = {}
        for name in self.param_names:
            if name not in params:
                raise TypeError(f"{self.kind} kernel needs parameter {name!r}")
            arrays[name] = np.atleast_1d(np.asarray(params.pop(name), dtype=np.float64)).copy()
        if params:
            raise TypeError(f"unexpected kernel parameters {sorted(params)}")
        sizes = {a.shape for a in arrays.values()}
        if len(sizes) != 1:
            raise ValueError("kernel parameter arrays must share one shape")
        self.params = arrays
        if trainable is True:
            self.trainable = set(self.param_names)
        elif trainable is False or trainable is None:
            self.trainable = set()
        else:
            self.trainable = set(trainable) & set(self.param_names)
        self.check()

    @property
    def num_basis(self) -> int:
        return len(next(iter(self.params.values())))

    def check(self):
        """Raise ValueError when a parameter leaves its admissible domain."""

    def project(self):
        """Clamp parameters back into their admissible domain (after an SGD step)."""

    def copy(self):
        new = type(self).__new__(type(self))
        new.params = {k: v.copy() for k, v in self.params.items()}
        new.trainable = set(self.trainable)
        return new

    def config(self) -> dict:
        return {"kind": self.kind, "num_basis": self.num_basis, "trainable": sorted(self.trainable)}

    # subclass hooks; t is an array of shape (..., 1) already clipped to >= 0
    def _value(self, t):
        raise NotImplementedError

    def _integral(self, t):
        raise NotImplementedError

    def _value_grad(self, t) -> dict:
        raise NotImplementedError

    def _integral_grad(self, t) -> dict:
        raise NotImplementedError

    def _upper_bound(self, t0, t1):
        raise NotImplementedError

    def total_mass(self) -> np.ndarray:
        """``K_m(inf)`` for each basis."""
        raise NotImplementedError

    def characteristic_time(self) -> float:
        """A rough time scale over which the kernel changes; sizes thinning windows."""
        return 1.0

    @staticmethod
    def _lag(t):
        return np.maximum(np.asarray(t, dtype=np.float64), 0.0)[..., None]

    def value(self, t):
        return self._value(self._lag(t))

    def integral(self, t):
        return self._integral(self._lag(t))

    def value_grad(self, t) -> dict:
        g = self._value_grad(self._lag(t))
        return {k: (v if k in self.trainable else np.zeros_like(v)) for k, v in g.items()}

    def integral_grad(self, t) -> dict:
        g = self._integral_grad(self._lag(t))
        return {k: (v if k in self.trainable else np.zeros_like(v)) for k, v in g.items()}

    def upper_bound(self, t0, t1):
        t0 = self._lag(t0)
        t1 = np.maximum(self._lag(t1), t0)
        return self._upper_bound(t0, t1)


class ExponentialKernel(KernelBank):
    """``omega * exp(-omega (t - delta))`` for ``t >= delta``, else 0."""

    kind = "exponential"
    param_names = ("omega", "delta")

    def __init__(self, omega=1.0, delta=0.0, trainable=False):
        super().__init__(trainable=trainable, omega=omega, delta=delta)

    def check(self):
        if np.any(self.params["omega"] <= 0) or np.any(self.params["delta"] < 0):
            raise ValueError("exponential kernel needs omega > 0 and delta >= 0")

    def project(self):
        np.maximum(self.params["omega"], 1e-6, out=self.params["omega"])
        np.maximum(self.params["delta"], 0.0, out=self.params["delta"])

    def _parts(self, t):
        w, d = self.params["omega"], self.params["delta"]
        on = t >= d
        u = np.where(on, t - d, 0.0)
        e = np.where(on, np.exp(-w * u), 0.0)
        return w, d, on, u, e

    def _value(self, t):
        w, _, _, _, e = self._parts(t)
        return w * e

    def _integral(self, t):
        _, _, on, _, e = self._parts(t)
        return np.where(on, 1.0 - e, 0.0)

    def _value_grad(self, t):
        w, _, _, u, e = self._parts(t)
        return {"omega": e * (1.0 - w * u), "delta": w * w * e}

    def _integral_grad(self, t):
        w, _, _, u, e = self._parts(t)
        return {"omega": u * e, "delta": -w * e}

    def _upper_bound(self, t0, t1):
        d = self.params["delta"]
        peak = self._value(np.maximum(t0, d))
        return np.where(t1 >= d, peak, 0.0)

    def total_mass(self):
        return np.ones(self.num_basis)

    def characteristic_time(self):
        return float(1.0 / self.params["omega"].max())


class RayleighKernel(KernelBank):
    """``omega * t * exp(-omega t^2 / 2)``: a unit-mass Rayleigh density."""

    kind = "rayleigh"
    param_names = ("omega",)
    scale = 2.0

    def __init__(self, omega=1.0, trainable=False):
        super().__init__(trainable=trainable, omega=omega)

    def check(self):
        if np.any(self.params["omega"] <= 0):
            raise ValueError("rayleigh kernel needs omega > 0")

    def project(self):
        np.maximum(self.params["omega"], 1e-6, out=self.params["omega"])

    def _value(self, t):
        w = self.params["omega"]
        return w * t * np.exp(-w * t * t / self.scale)

    def _integral(self, t):
        w = self.params["omega"]
        return -np.expm1(-w * t * t / self.scale)

    def _value_grad(self, t):
        w = self.params["omega"]
        e = np.exp(-w * t * t / self.scale)
        return {"omega": t * e * (1.0 - w * t * t / self.scale)}

    def _integral_grad(self, t):
        w = self.params["omega"]
        return {"omega": (t * t / self.scale) * np.exp(-w * t * t / self.scale)}

    def _upper_bound(self, t0, t1):
        mode = np.sqrt(self.scale / (2.0 * self.params["omega"]))
        return self._value(np.clip(mode, t0, t1))

    def total_mass(self):
        return np.ones(self.num_basis)

    def characteristic_time(self):
        return float(np.sqrt(1.0 / self.params["omega"].max()))


class GaussianKernel(KernelBank):
    """Half-Gaussian centred at zero; total mass 1/2 on ``t >= 0``."""

    kind = "gaussian"
    param_names = ("sigma",)

    def __init__(self, sigma=1.0, trainable=False):
        super().__init__(trainable=trainable, sigma=sigma)

    def check(self):
        if np.any(self.params["sigma"] <= 0):
            raise ValueError("gaussian kernel needs sigma > 0")

    def project(self):
        np.maximum(self.params["sigma"], 1e-6, out=self.params["sigma"])

    def _value(self, t):
        s = self.params["sigma"]
        return np.exp(-0.5 * (t / s) ** 2) / (_SQRT2PI * s)

    def _integral(self, t):
        return 0.5 * erf(t / (self.params["sigma"] * _SQRT2))

    def _value_grad(self, t):
        s = self.params["sigma"]
        return {"sigma": self._value(t) * (t * t / s**3 - 1.0 / s)}

    def _integral_grad(self, t):
        s = self.params["sigma"]
        return {"sigma": -(t / s) * self._value(t)}

    def _upper_bound(self, t0, t1):
        return self._value(t0)

    def total_mass(self):
        return np.full(self.num_basis, 0.5)

    def characteristic_time(self):
        return float(self.params["sigma"].max())


class PowerlawKernel(KernelBank):
    """Flat ``(omega-1)/delta`` on ``[0, delta)``, then ``(omega-1) delta^(omega-1) t^-omega``."""

    kind = "powerlaw"
    param_names = ("omega", "delta")

    def __init__(self, omega=2.0, delta=1.0, trainable=False):
        super().__init__(trainable=trainable, omega=omega, delta=delta)

    def check(self):
        if np.any(self.params["omega"] <= 1) or np.any(self.params["delta"] <= 0):
            raise ValueError("powerlaw kernel needs omega > 1 and delta > 0")

    def project(self):
        np.maximum(self.params["omega"], 1.0 + 1e-6, out=self.params["omega"])
        np.maximum(self.params["delta"], 1e-6, out=self.params["delta"])

    def _parts(self, t):
        w, d = self.params["omega"], self.params["delta"]
        tail = t >= d
        r = np.where(tail, t / d, 1.0)  # t/delta on the tail, 1 elsewhere
        return w, d, tail, r

    def _value(self, t):
        w, d, tail, r = self._parts(t)
        return (w - 1.0) / d * np.where(tail, r**-w, 1.0)

    def _integral(self, t):
        w, d, tail, r = self._parts(t)
        head = (w - 1.0) / d * np.minimum(t, d)
        return head + np.where(tail, 1.0 - r ** (1.0 - w), 0.0)

    def _value_grad(self, t):
        w, d, tail, r = self._parts(t)
        lr = np.log(r)
        p = r**-w
        return {
            "omega": np.where(tail, p / d * (1.0 - (w - 1.0) * lr), 1.0 / d),
            "delta": np.where(tail, (w - 1.0) ** 2 * p / d**2, -(w - 1.0) / d**2),
        }

    def _integral_grad(self, t):
        w, d, tail, r = self._parts(t)
        q = r ** (1.0 - w)
        return {
            "omega": np.where(tail, 1.0 + np.log(r) * q, t / d),
            "delta": np.where(tail, (1.0 - w) * q / d, -(w - 1.0) * t / d**2),
        }

    def _upper_bound(self, t0, t1):
        return self._value(t0)

    def total_mass(self):
        return self.params["omega"].copy()

    def characteristic_time(self):
        return float(self.params["delta"].max())


class GateKernel(KernelBank):
    """Uniform density ``1/delta`` on ``[omega, omega + delta]``."""

    kind = "gate"
    param_names = ("omega", "delta")

    def __init__(self, omega=0.0, delta=1.0, trainable=False):
        super().__init__(trainable=trainable, omega=omega, delta=delta)

    def check(self):
        if np.any(self.params["omega"] < 0) or np.any(self.params["delta"] <= 0):
            raise ValueError("gate kernel needs omega >= 0 and delta > 0")

    def project(self):
        np.maximum(self.params["omega"], 0.0, out=self.params["omega"])
        np.maximum(self.params["delta"], 1e-6, out=self.params["delta"])

    def _value(self, t):
        w, d = self.params["omega"], self.params["delta"]
        return np.where((t >= w) & (t <= w + d), 1.0 / d, 0.0)

    def _integral(self, t):
        w, d = self.params["omega"], self.params["delta"]
        return np.clip((t - w) / d, 0.0, 1.0)

    def _value_grad(self, t):
        w, d = self.params["omega"], self.params["delta"]
        inside = (t >= w) & (t <= w + d)
        return {"omega": np.zeros(np.broadcast_shapes(t.shape, w.shape)),
                "delta": np.where(inside, -1.0 / d**2, 0.0)}

    def _integral_grad(self, t):
        # right derivatives: the ramp is active on (omega, omega + delta]
        w, d = self.params["omega"], self.params["delta"]
        ramp = (t > w) & (t <= w + d)
        return {"omega": np.where(ramp, -1.0 / d, 0.0),
                "delta": np.where(ramp, -(t - w) / d**2, 0.0)}

    def _upper_bound(self, t0, t1):
        w, d = self.params["omega"], self.params["delta"]
        hit = (t1 >= w) & (t0 <= w + d)
        return np.where(hit, 1.0 / d, 0.0)

    def total_mass(self):
        return np.ones(self.num_basis)

    def characteristic_time(self):
        return float(self.params["delta"].min())


class MultiGaussKernel(KernelBank):
    """Gaussian bumps ``N(t; t_m, sigma_m^2)`` restricted to ``t >= 0``."""

    kind = "multigauss"
    param_names = ("centers", "widths")

    def __init__(self, centers=(1.0, 2.0), widths=(0.5, 0.5), trainable=False):
        super().__init__(trainable=trainable, centers=centers, widths=widths)

    @classmethod
    def from_grid(cls, t_max: float, num_basis: int, trainable=False):
        """Centres evenly spaced on ``[0, t_max]``, widths half the spacing."""
        if num_basis < 1 or t_max <= 0:
            raise ValueError("need num_basis >= 1 and t_max > 0")
        if num_basis == 1:
            return cls(centers=[0.0], widths=[t_max / 2.0], trainable=trainable)
        centers = np.linspace(0.0, t_max, num_basis)
        spacing = centers[1] - centers[0]
        return cls(centers=centers, widths=np.full(num_basis, spacing / 2.0), trainable=trainable)

    def check(self):
        c, s = self.params["centers"], self.params["widths"]
        if np.any(s <= 0):
            raise ValueError("multigauss kernel needs widths > 0")
        if np.any(np.diff(c) <= 0):
            raise ValueError("multigauss centers must be strictly increasing")

    def project(self):
        np.maximum(self.params["widths"], 1e-6, out=self.params["widths"])
        c = self.params["centers"]
        for m in range(1, len(c)):
            c[m] = max(c[m], c[m - 1] + 1e-9)

    def _value(self, t):
        c, s = self.params["centers"], self.params["widths"]
        return np.exp(-0.5 * ((t - c) / s) ** 2) / (_SQRT2PI * s)

    def _integral(self, t):
        c, s = self.params["centers"], self.params["widths"]
        return 0.5 * (erf((t - c) / (s * _SQRT2)) + erf(c / (s * _SQRT2)))

    def _value_grad(self, t):
        c, s = self.params["centers"], self.params["widths"]
        k = self._value(t)
        return {"centers": k * (t - c) / s**2, "widths": k * ((t - c) ** 2 / s**3 - 1.0 / s)}

    def _integral_grad(self, t):
        c, s = self.params["centers"], self.params["widths"]
        k = self._value(t)
        k0 = self._value(np.zeros((1,)))
        return {"centers": k0 - k, "widths": -((t - c) / s) * k - (c / s) * k0}

    def _upper_bound(self, t0, t1):
        return self._value(np.clip(self.params["centers"], t0, t1))

    def total_mass(self):
        c, s = self.params["centers"], self.params["widths"]
        return 0.5 * (1.0 + erf(c / (s * _SQRT2)))

    def characteristic_time(self):
        return float(self.params["widths"].min())


KERNELS = {
    cls.kind: cls
    for cls in (ExponentialKernel, RayleighKernel, GaussianKernel, PowerlawKernel, GateKernel, MultiGaussKernel)
}


def make_kernel(kind: str, trainable=False, **params) -> KernelBank:
    try:
        cls = KERNELS[kind.lower()]
    except KeyError:
        raise ValueError(f"unknown kernel {kind!r}; choose from {sorted(KERNELS)}") from None
    return cls(trainable=trainable, **params)


def _check_lag(t):
    t = np.asarray(t, dtype=np.float64)
    if np.any(t < 0):
        raise ValueError("kernel lag must be nonnegative")
    return t


def kernel_value(bank: KernelBank, t):
    """``kappa_m(t)`` for every basis; shape ``t.shape + (M,)``."""
    return bank.value(_check_lag(t))


def kernel_integral(bank: KernelBank, t):
    """``K_m(t)``; ``t = inf`` gives the total mass."""
    t = _check_lag(t)
    out = bank.integral(np.where(np.isinf(t), 0.0, t))
    if np.any(np.isinf(t)):
        out = np.where(np.isinf(t)[..., None], bank.total_mass(), out)
    return out


def kernel_param_grad(bank: KernelBank, t) -> dict:
    """``{name: (d kappa / d theta, d K / d theta)}``; untrainable parameters give zeros."""
    t = _check_lag(t)
    vg, ig = bank.value_grad(t), bank.integral_grad(t)
    return {k: (vg[k], ig[k]) for k in bank.param_names}


def kernel_upper_bound(bank: KernelBank, t0, t1):
    """Per-basis upper bound of ``kappa_m`` over ``[t0, t1]``."""
    t0 = _check_lag(t0)
    t1 = np.asarray(t1, dtype=np.float64)
    if np.any(t1 < t0):
        raise ValueError("need t0 <= t1")
    return bank.upper_bound(t0, t1)
