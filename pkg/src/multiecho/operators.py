"""Linear operators: unitary FFT, line-mask sampling, and patch extraction.

Conventions pinned here and relied on everywhere else:

* 2-D FFTs are unitary (``1/sqrt(H*W)`` both ways), DC at index 0.
* Sampling masks select whole k-space rows; the densely sampled low-frequency
  block is contiguous *after* fftshift (centered on row ``H//2`` in the
  shifted view) and stored as unshifted indices.
* The image-domain adjoint of (FFT then restriction) takes the real part,
  which is the exact adjoint for real-valued images under the inner product
  ``<a, b> = Re(sum(a * conj(b)))``.
* Patches are ``p x p`` blocks vectorized row-major; patch grids step by
  ``stride`` and always include anchors flush with the bottom/right edges so
  every pixel is covered.  ``assemble_adjoint`` is the exact transpose of
  ``extract_patches`` (summation, no averaging).

Everything is computed with sequential numpy reductions, so results are
deterministic and independent of thread count.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (
    InvalidArgumentError,
    KSpaceData,
    MultiEchoImage,
    PatchMatrix,
    SamplingMask,
)

__all__ = [
    "fft2_unitary",
    "ifft2_unitary",
    "generate_mask",
    "apply_forward",
    "apply_adjoint",
    "ForwardModel",
    "PatchScheme",
    "extract_patches",
    "assemble_adjoint",
]


def _check_plane(plane: np.ndarray) -> np.ndarray:
    arr = np.asarray(plane)
    if arr.ndim != 2:
        raise InvalidArgumentError(f"expected a 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise InvalidArgumentError("input contains non-finite entries")
    return arr


def fft2_unitary(plane: np.ndarray) -> np.ndarray:
    """Unitary 2-D DFT of one image plane (real or complex), DC at index 0."""
    return np.fft.fft2(_check_plane(plane), norm="ortho")


def ifft2_unitary(plane: np.ndarray) -> np.ndarray:
    """Unitary 2-D inverse DFT; exact inverse of :func:`fft2_unitary`."""
    return np.fft.ifft2(_check_plane(plane), norm="ortho")


def generate_mask(
    height: int,
    width: int,
    lines_per_echo: int,
    echoes: int,
    dense_fraction: float = 1.0 / 3.0,
    per_echo_distinct: bool = False,
    seed: int = 0,
) -> SamplingMask:
    """Draw a line-undersampling mask with a dense low-frequency block.

    ``floor(dense_fraction * lines_per_echo)`` contiguous lines centered on
    the DC row (row ``height//2`` of the fftshifted view) are always sampled;
    the remaining lines are drawn uniformly at random without replacement
    from the other rows.  With ``per_echo_distinct`` each echo gets its own
    random complement, otherwise all echoes share one draw.  Deterministic
    for a given seed.
    """
    if height < 1 or width < 1 or echoes < 1:
        raise InvalidArgumentError(
            f"dims must be positive, got {height}x{width}, {echoes} echoes"
        )
    if not 1 <= lines_per_echo <= height:
        raise InvalidArgumentError(
            f"lines_per_echo must be in [1, {height}], got {lines_per_echo}"
        )
    if not 0.0 <= dense_fraction <= 1.0:
        raise InvalidArgumentError(f"dense_fraction must be in [0, 1], got {dense_fraction}")

    n_dense = int(np.floor(dense_fraction * lines_per_echo))
    # Contiguous block around the DC row in the shifted view, then unshift.
    start = height // 2 - n_dense // 2
    dense_rows = sorted(((s - height // 2) % height) for s in range(start, start + n_dense))
    pool = np.array(sorted(set(range(height)) - set(dense_rows)), dtype=np.int64)
    n_random = lines_per_echo - n_dense

    rng = np.random.default_rng(seed)

    def draw() -> tuple[int, ...]:
        picked = rng.choice(pool, size=n_random, replace=False) if n_random else []
        return tuple(sorted(dense_rows + [int(r) for r in picked]))

    if per_echo_distinct:
        lines = tuple(draw() for _ in range(echoes))
    else:
        shared = draw()
        lines = tuple(shared for _ in range(echoes))
    return SamplingMask(height=height, width=width, lines=lines)


def _forward_stack(x: np.ndarray, bool_mask: np.ndarray) -> np.ndarray:
    y = np.empty(x.shape, dtype=np.complex128)
    for c in range(x.shape[2]):
        y[:, :, c] = np.fft.fft2(x[:, :, c], norm="ortho")
    y[~bool_mask] = 0.0
    return y


def _adjoint_stack(y: np.ndarray, bool_mask: np.ndarray) -> np.ndarray:
    x = np.empty(y.shape, dtype=np.float64)
    emb = np.where(bool_mask, y, 0.0)
    for c in range(y.shape[2]):
        x[:, :, c] = np.fft.ifft2(emb[:, :, c], norm="ortho").real
    return x


def apply_forward(x: MultiEchoImage, mask: SamplingMask) -> KSpaceData:
    """Sample k-space: per echo, unitary FFT then restriction to masked rows."""
    if (x.height, x.width, x.echoes) != (mask.height, mask.width, mask.echoes):
        raise InvalidArgumentError(
            f"image dims {(x.height, x.width, x.echoes)} do not match mask "
            f"{(mask.height, mask.width, mask.echoes)}"
        )
    if not np.all(np.isfinite(x.data)):
        raise InvalidArgumentError("image contains non-finite entries")
    return KSpaceData(_forward_stack(x.data, mask.bool_view()), mask)


def apply_adjoint(y: KSpaceData) -> MultiEchoImage:
    """Exact adjoint of :func:`apply_forward` on real images.

    Embeds the samples at their masked positions, applies the unitary inverse
    FFT per echo, and takes the real part.  On a full mask this inverts
    :func:`apply_forward` exactly.
    """
    if not np.all(np.isfinite(y.data)):
        raise InvalidArgumentError("k-space contains non-finite entries")
    return MultiEchoImage(_adjoint_stack(y.data, y.mask.bool_view()))


@dataclass(frozen=True)
class ForwardModel:
    """Bundles a mask with cached sampling structure for repeated application."""

    mask: SamplingMask
    bool_mask: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "bool_mask", self.mask.bool_view())

    @property
    def shape(self) -> tuple[int, int, int]:
        return (self.mask.height, self.mask.width, self.mask.echoes)

    def forward(self, x: MultiEchoImage) -> KSpaceData:
        return apply_forward(x, self.mask)

    def adjoint(self, y: KSpaceData) -> MultiEchoImage:
        return apply_adjoint(y)

    def normal(self, x: MultiEchoImage) -> MultiEchoImage:
        """adjoint(forward(x)): symmetric PSD on real image stacks."""
        return MultiEchoImage(
            _adjoint_stack(_forward_stack(x.data, self.bool_mask), self.bool_mask)
        )


def _anchors(extent: int, patch: int, stride: int) -> list[int]:
    pos = list(range(0, extent - patch + 1, stride))
    if pos[-1] != extent - patch:
        pos.append(extent - patch)  # flush edge anchor keeps full coverage
    return pos


@dataclass(frozen=True)
class PatchScheme:
    """Grid of overlapping patch locations on an ``height x width`` plane."""

    height: int
    width: int
    patch_size: int
    stride: int
    locations: tuple[tuple[int, int], ...]
    flat_index: np.ndarray = field(repr=False, compare=False)

    @classmethod
    def build(cls, height: int, width: int, patch_size: int, stride: int) -> "PatchScheme":
        if patch_size < 1 or patch_size > min(height, width):
            raise InvalidArgumentError(
                f"patch_size must be in [1, {min(height, width)}], got {patch_size}"
            )
        if stride < 1 or stride > patch_size:
            raise InvalidArgumentError(
                f"stride must be in [1, patch_size={patch_size}] so that "
                f"patches cover every pixel, got {stride}"
            )
        rows = _anchors(height, patch_size, stride)
        cols = _anchors(width, patch_size, stride)
        locations = tuple((r, c) for r in rows for c in cols)
        dr, dc = np.meshgrid(np.arange(patch_size), np.arange(patch_size), indexing="ij")
        offsets = (dr * width + dc).ravel()  # row-major vectorization of a patch
        anchors = np.array([r * width + c for r, c in locations], dtype=np.int64)
        flat = anchors[:, None] + offsets[None, :]
        return cls(height, width, patch_size, stride,
                   locations=locations, flat_index=flat)

    @property
    def num_locations(self) -> int:
        return len(self.locations)

    @property
    def patch_dim(self) -> int:
        return self.patch_size * self.patch_size

    def coverage(self) -> np.ndarray:
        """Per-pixel patch multiplicity: diagonal of sum_i P_i^T P_i."""
        counts = np.bincount(self.flat_index.ravel(), minlength=self.height * self.width)
        return counts.reshape(self.height, self.width).astype(np.float64)


def patch_stack(arr: np.ndarray, scheme: PatchScheme) -> np.ndarray:
    """Gather all patches of an ``(H, W)`` or ``(H, W, C)`` array.

    Returns ``(num_locations, patch_dim)`` for a plane and
    ``(num_locations, patch_dim, C)`` for a stack.
    """
    if arr.shape[:2] != (scheme.height, scheme.width):
        raise InvalidArgumentError(
            f"array dims {arr.shape[:2]} do not match scheme "
            f"{(scheme.height, scheme.width)}"
        )
    flat = arr.reshape(scheme.height * scheme.width, *arr.shape[2:])
    return flat[scheme.flat_index]


def scatter_stack(values: np.ndarray, scheme: PatchScheme) -> np.ndarray:
    """Transpose of :func:`patch_stack`: sum patch values back onto the grid."""
    if values.shape[:2] != (scheme.num_locations, scheme.patch_dim):
        raise InvalidArgumentError(
            f"values shape {values.shape[:2]} does not match scheme "
            f"({scheme.num_locations}, {scheme.patch_dim})"
        )
    out = np.zeros((scheme.height * scheme.width, *values.shape[2:]), dtype=np.float64)
    np.add.at(out, scheme.flat_index, values)
    return out.reshape(scheme.height, scheme.width, *values.shape[2:])


def extract_patches(x: MultiEchoImage, scheme: PatchScheme) -> list[PatchMatrix]:
    """All-echo patch matrices, one per scheme location, in scheme order."""
    stack = patch_stack(x.data, scheme)
    return [PatchMatrix(i, stack[i]) for i in range(scheme.num_locations)]


def as_patch_array(patches, scheme: PatchScheme) -> np.ndarray:
    """Coerce a list of :class:`PatchMatrix` (or an ndarray) to (N, patch_dim, C)."""
    if isinstance(patches, np.ndarray):
        arr = patches
    else:
        arr = np.stack([p.values for p in patches])
    if arr.ndim == 2:
        arr = arr[:, :, None]
    if arr.shape[0] != scheme.num_locations or arr.shape[1] != scheme.patch_dim:
        raise InvalidArgumentError(
            f"patch array shape {arr.shape} does not match scheme "
            f"({scheme.num_locations} locations, dim {scheme.patch_dim})"
        )
    return np.asarray(arr, dtype=np.float64)


def assemble_adjoint(patches, scheme: PatchScheme, height: int, width: int) -> MultiEchoImage:
    """Exact transpose of :func:`extract_patches`.

    Sums every patch back into an initially zero ``height x width`` stack;
    overlapping contributions add (no averaging), so
    ``<extract(x), P> == <x, assemble(P)>`` holds to round-off.
    """
    if (height, width) != (scheme.height, scheme.width):
        raise InvalidArgumentError(
            f"target dims {(height, width)} do not match scheme "
            f"{(scheme.height, scheme.width)}"
        )
    return MultiEchoImage(scatter_stack(as_patch_array(patches, scheme), scheme))
