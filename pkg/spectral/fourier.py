"""Truncated Fourier fields on the d-torus [0, 2π)^d.

A field is stored by its Fourier coefficients on the symmetric box
``‖k‖_∞ ≤ K`` with the convention f(x) = Σ_k F f(k) e^{i k·x} against the
normalized Lebesgue measure. Products and pointwise nonlinearities go through
a padded collocation grid of 2(2K+1) points per axis, which is enough for the
retained modes of a quadratic product to be the exact convolution.
"""
import threading

import numpy as np

CONVENTION = "exp(+ikx), normalized measure"


class SpectralException:
    class DimensionMismatch(Exception):
        pass

    class InvalidRadius(Exception):
        pass

    class CompositionDomain(Exception):
        pass

    class NeutralityViolated(Exception):
        pass

    class NotDivergenceFree(Exception):
        pass

    class EmptyTrajectory(Exception):
        pass


class GridPlan:
    """Wavenumber tables and FFT index maps shared by every field of a (d, K)."""

    def __init__(self, dim: int, cutoff: int) -> None:
        if dim not in (1, 2, 3):
            raise ValueError(f"dimension must be 1, 2 or 3, got {dim}")
        if cutoff < 0:
            raise ValueError(f"cutoff must be non-negative, got {cutoff}")
        self.dim = dim
        self.cutoff = cutoff
        self.box_size = 2 * cutoff + 1
        self.grid_size = 2 * self.box_size
        self.modes = np.arange(-cutoff, cutoff + 1)
        self.fft_index = self.modes % self.grid_size

        mesh = np.meshgrid(*([self.modes] * dim), indexing="ij")
        self.k = np.stack(mesh).astype(float)
        self.k_sq = np.sum(self.k**2, axis=0)
        self.k_norm = np.sqrt(self.k_sq)
        self.zero = (cutoff,) * dim
        # 1/|k|² with the k=0 entry set to zero
        self.inv_k_sq = np.zeros_like(self.k_sq)
        nonzero = self.k_sq > 0
        self.inv_k_sq[nonzero] = 1.0 / self.k_sq[nonzero]

        for array in (self.k, self.k_sq, self.k_norm, self.inv_k_sq):
            array.setflags(write=False)

    @property
    def spatial_axes(self):
        return tuple(range(1, self.dim + 1))

    @property
    def box_selector(self):
        return (slice(None),) + np.ix_(*([self.fft_index] * self.dim))

    def grid_points(self):
        """Collocation points, shape (grid_size**dim, dim), row-major."""
        axis = 2 * np.pi * np.arange(self.grid_size) / self.grid_size
        mesh = np.meshgrid(*([axis] * self.dim), indexing="ij")
        return np.stack([m.ravel() for m in mesh], axis=1)


_PLANS = {}
_PLANS_LOCK = threading.Lock()


def get_plan(dim: int, cutoff: int) -> GridPlan:
    key = (dim, cutoff)
    with _PLANS_LOCK:
        plan = _PLANS.get(key)
        if plan is None:
            plan = GridPlan(dim, cutoff)
            _PLANS[key] = plan
    return plan


class SpectralField:
    """Immutable real field (scalar or vector) given by its Fourier coefficients.

    ``coeffs`` has shape ``(m, 2K+1, ..., 2K+1)``; position ``j`` along a
    spatial axis holds mode ``k = j - K``.
    """

    __array_priority__ = 1000

    def __init__(self, coeffs) -> None:
        coeffs = np.array(coeffs, dtype=complex)
        if coeffs.ndim < 2 or coeffs.ndim > 4:
            raise SpectralException.DimensionMismatch(
                f"coefficient array of shape {coeffs.shape} is not (m, box...)"
            )
        box = coeffs.shape[1:]
        if len(set(box)) != 1 or box[0] % 2 == 0:
            raise SpectralException.DimensionMismatch(
                f"cutoff box {box} is not a symmetric cube"
            )
        coeffs.setflags(write=False)
        self._coeffs = coeffs
        self._plan = get_plan(coeffs.ndim - 1, (box[0] - 1) // 2)

    @property
    def coeffs(self) -> np.ndarray:
        return self._coeffs

    @property
    def plan(self) -> GridPlan:
        return self._plan

    @property
    def dim(self) -> int:
        return self._plan.dim

    @property
    def cutoff(self) -> int:
        return self._plan.cutoff

    @property
    def components(self) -> int:
        return self._coeffs.shape[0]

    @property
    def is_scalar(self) -> bool:
        return self.components == 1

    # construction

    @classmethod
    def zeros(cls, dim, cutoff, components=1):
        plan = get_plan(dim, cutoff)
        return cls(np.zeros((components,) + (plan.box_size,) * dim, dtype=complex))

    @classmethod
    def constant(cls, dim, cutoff, values):
        values = np.atleast_1d(np.asarray(values, dtype=float))
        plan = get_plan(dim, cutoff)
        coeffs = np.zeros((len(values),) + (plan.box_size,) * dim, dtype=complex)
        coeffs[(slice(None),) + plan.zero] = values
        return cls(coeffs)

    @classmethod
    def from_terms(cls, dim, cutoff, components_terms):
        """Build a field from per-component trigonometric terms.

        ``components_terms`` holds, per component, a pair ``(const, terms)``
        where each term is ``(kind, k, amplitude)`` with kind ``"cos"`` or
        ``"sin"``; the component is ``const + Σ amplitude·kind(k·x)``.
        """
        plan = get_plan(dim, cutoff)
        coeffs = np.zeros(
            (len(components_terms),) + (plan.box_size,) * dim, dtype=complex
        )
        for c, (const, terms) in enumerate(components_terms):
            coeffs[(c,) + plan.zero] += const
            for kind, k, amplitude in terms:
                k = tuple(int(v) for v in k)
                if len(k) != dim:
                    raise SpectralException.DimensionMismatch(
                        f"mode {k} does not have {dim} entries"
                    )
                if max(abs(v) for v in k) > cutoff:
                    raise ValueError(f"mode {k} lies outside the cutoff box K={cutoff}")
                pos = tuple(v + cutoff for v in k)
                neg = tuple(-v + cutoff for v in k)
                if kind == "cos":
                    coeffs[(c,) + pos] += amplitude / 2
                    coeffs[(c,) + neg] += amplitude / 2
                elif kind == "sin":
                    coeffs[(c,) + pos] += amplitude / 2j
                    coeffs[(c,) + neg] -= amplitude / 2j
                else:
                    raise ValueError(f"unknown term kind {kind!r}")
        return cls(coeffs)

    @classmethod
    def from_grid(cls, values, cutoff):
        """Project real collocation values of shape (m, M, ..., M) onto the box."""
        values = np.asarray(values, dtype=float)
        dim = values.ndim - 1
        plan = get_plan(dim, cutoff)
        if values.shape[1:] != (plan.grid_size,) * dim:
            raise SpectralException.DimensionMismatch(
                f"grid of shape {values.shape[1:]} does not match K={cutoff}"
            )
        spectrum = np.fft.fftn(values, axes=plan.spatial_axes) / plan.grid_size**dim
        return cls(spectrum[plan.box_selector]).symmetrized()

    @classmethod
    def stack(cls, fields):
        fields = list(fields)
        check_compatible(*fields)
        return cls(np.concatenate([f.coeffs for f in fields], axis=0))

    # evaluation

    def to_grid(self) -> np.ndarray:
        plan = self._plan
        padded = np.zeros(
            (self.components,) + (plan.grid_size,) * self.dim, dtype=complex
        )
        padded[plan.box_selector] = self._coeffs
        values = np.fft.ifftn(padded, axes=plan.spatial_axes) * plan.grid_size**self.dim
        return values.real

    def component(self, index: int) -> "SpectralField":
        return SpectralField(self._coeffs[index : index + 1])

    def symmetrized(self) -> "SpectralField":
        axes = self._plan.spatial_axes
        mirrored = np.conj(np.flip(self._coeffs, axis=axes))
        return SpectralField(0.5 * (self._coeffs + mirrored))

    def reality_defect(self) -> float:
        """max |F f(-k) - conj F f(k)|, zero for a real field."""
        mirrored = np.conj(np.flip(self._coeffs, axis=self._plan.spatial_axes))
        return float(np.max(np.abs(self._coeffs - mirrored), initial=0.0))

    def l2_norm_sq(self) -> float:
        """Σ_c ‖f_c‖²_{L²} by Parseval."""
        return float(np.sum(np.abs(self._coeffs) ** 2))

    def sup_on_grid(self) -> float:
        return float(np.max(np.abs(self.to_grid())))

    def shifted(self, means) -> "SpectralField":
        """Add a per-component constant."""
        means = np.broadcast_to(np.asarray(means, dtype=float), (self.components,))
        coeffs = self._coeffs.copy()
        coeffs[(slice(None),) + self._plan.zero] += means
        return SpectralField(coeffs)

    # arithmetic (linear operations only; products live in spectral.calculus)

    def __add__(self, other):
        if isinstance(other, SpectralField):
            check_compatible(self, other)
            return SpectralField(self._coeffs + other._coeffs)
        if np.isscalar(other):
            coeffs = self._coeffs.copy()
            coeffs[(slice(None),) + self._plan.zero] += other
            return SpectralField(coeffs)
        return NotImplemented

    __radd__ = __add__

    def __neg__(self):
        return SpectralField(-self._coeffs)

    def __sub__(self, other):
        if isinstance(other, SpectralField) or np.isscalar(other):
            return self + (-other)
        return NotImplemented

    def __rsub__(self, other):
        return (-self) + other

    def __mul__(self, other):
        if np.isscalar(other):
            return SpectralField(self._coeffs * other)
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return SpectralField(self._coeffs / other)
        return NotImplemented

    def __repr__(self) -> str:
        return (
            f"SpectralField(dim={self.dim}, cutoff={self.cutoff}, "
            f"components={self.components})"
        )


def check_compatible(*fields):
    first = fields[0]
    for other in fields[1:]:
        if other.dim != first.dim or other.cutoff != first.cutoff:
            raise SpectralException.DimensionMismatch(
                f"fields on (d={first.dim}, K={first.cutoff}) and "
                f"(d={other.dim}, K={other.cutoff}) cannot be combined"
            )


def evaluate_at(field: SpectralField, points, batch_size: int = 2048) -> np.ndarray:
    """Exact trigonometric sum at arbitrary points.

    Returns an array of shape (n_points, components). The sum is tensorized
    axis by axis so the phase factors are (n_points, 2K+1) per axis.
    """
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if points.shape[1] != field.dim:
        raise SpectralException.DimensionMismatch(
            f"points of dimension {points.shape[1]} for a d={field.dim} field"
        )
    modes = field.plan.modes
    out = np.empty((points.shape[0], field.components))
    for start in range(0, points.shape[0], batch_size):
        chunk = points[start : start + batch_size]
        phases = [np.exp(1j * np.outer(chunk[:, a], modes)) for a in range(field.dim)]
        for c in range(field.components):
            coeffs = field.coeffs[c]
            if field.dim == 1:
                values = phases[0] @ coeffs
            elif field.dim == 2:
                values = np.einsum("pj,pj->p", phases[0] @ coeffs, phases[1])
            else:
                partial = np.einsum("pj,jkl->pkl", phases[0], coeffs)
                partial = np.einsum("pkl,pk->pl", partial, phases[1])
                values = np.einsum("pl,pl->p", partial, phases[2])
            out[start : start + len(chunk), c] = values.real
    return out
