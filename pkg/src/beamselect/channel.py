"""Saleh-Venzuela multipath channels and their beamspace representation.

A user's channel row is h_k = sum_l alpha_kl * a(u_kl)^T with steering
vector entries [a(u)]_n = exp(j*n*u) and spatial frequency u = pi*sin(theta)
for a half-wavelength uniform linear array.  The beamspace channel is
H_tilde = H @ F for an N-point DFT matrix F.  Two DFT scalings are
supported: the 1/N scaling (F @ F^H = I/N) used for figure reproduction and
an energy-preserving 1/sqrt(N) unitary scaling.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidConfigError, InvalidInputError

PAPER_CONVENTION = "paper_1_over_N"
UNITARY_CONVENTION = "unitary_1_over_sqrtN"
CONVENTIONS = (PAPER_CONVENTION, UNITARY_CONVENTION)

# Channel-dump header: magic, K, N (int32 LE), convention byte, zero padding.
DUMP_MAGIC = b"BSCH"
DUMP_HEADER = struct.Struct("<4sii B 11x")
DUMP_CONVENTION_BYTES = {None: 0, PAPER_CONVENTION: 1, UNITARY_CONVENTION: 2}
DUMP_BYTE_CONVENTIONS = {v: k for k, v in DUMP_CONVENTION_BYTES.items()}


@dataclass
class SteeringVector:
    """Array response at one spatial frequency; entries exp(j*n*u)."""

    entries: np.ndarray
    spatial_frequency: float


@dataclass
class PathSpec:
    """One propagation path: complex gain and angle of departure (radians)."""

    gain: complex
    angle_of_departure: float
    is_los: bool


@dataclass
class ChannelMatrix:
    """K x N antenna-domain channel; row k belongs to user k."""

    data: np.ndarray
    K: int
    N: int
    paths: list = field(default_factory=list, repr=False)


@dataclass
class BeamspaceChannel:
    """K x N beamspace channel H @ F under the stored DFT scaling."""

    data: np.ndarray
    scaling_convention: str

    @property
    def K(self):
        return self.data.shape[0]

    @property
    def N(self):
        return self.data.shape[1]


@dataclass(frozen=True)
class ChannelConfig:
    """Multipath channel ensemble description (Table defaults: 1 LoS at
    0 dB plus two NLoS paths at -10 dB, AoD uniform in [-90, 90] degrees)."""

    K: int
    N: int
    paths_per_user: int = 3
    los_power_db: float = 0.0
    nlos_power_db: float = -10.0
    gain_model: str = "constant"  # constant-modulus phase or "rayleigh"
    aod_limit_deg: float = 90.0

    def __post_init__(self):
        if self.K < 1 or self.N < 1 or self.paths_per_user < 1:
            raise InvalidConfigError(
                "K, N and paths_per_user must all be positive, got "
                f"K={self.K} N={self.N} L={self.paths_per_user}"
            )
        if self.gain_model not in ("constant", "rayleigh"):
            raise InvalidConfigError(f"unknown gain_model {self.gain_model!r}")
        if not np.isfinite([self.los_power_db, self.nlos_power_db]).all():
            raise InvalidConfigError("path powers must be finite")

    def path_powers(self):
        """Linear per-path powers, LoS first."""
        los = 10.0 ** (self.los_power_db / 10.0)
        nlos = 10.0 ** (self.nlos_power_db / 10.0)
        return np.array([los] + [nlos] * (self.paths_per_user - 1))


def trial_seed(master_seed: int, trial: int) -> np.random.SeedSequence:
    """Counter-based substream for one Monte Carlo trial.

    Substreams are independent of execution order, so trials may run in
    parallel and still reproduce bit-identically.
    """
    return np.random.SeedSequence(master_seed, spawn_key=(trial,))


def _child_seed(seq: np.random.SeedSequence, key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(seq.entropy, spawn_key=tuple(seq.spawn_key) + (key,))


def _as_seedseq(rng) -> np.random.SeedSequence:
    if isinstance(rng, np.random.SeedSequence):
        return rng
    if isinstance(rng, (int, np.integer)):
        return np.random.SeedSequence(int(rng))
    raise InvalidInputError(f"rng must be an int seed or SeedSequence, got {type(rng)}")


def steering_vector(u: float, N: int) -> SteeringVector:
    """Return a(u) with [a(u)]_n = exp(j*n*u) for n = 0..N-1."""
    if N < 1:
        raise InvalidInputError(f"steering vector length must be >= 1, got {N}")
    if not np.isfinite(u):
        raise InvalidInputError("spatial frequency must be finite")
    entries = np.exp(1j * float(u) * np.arange(N))
    return SteeringVector(entries=entries, spatial_frequency=float(u))


def dft_matrix(N: int, convention: str = PAPER_CONVENTION) -> np.ndarray:
    """N x N DFT matrix, [F]_ab = s * exp(-j*2*pi*a*b/N).

    The scale s is 1/N under the 1/N power-normalized convention (so that
    F @ F^H = I/N) and 1/sqrt(N) under the unitary convention.
    """
    if N < 1:
        raise InvalidInputError(f"DFT size must be >= 1, got {N}")
    _check_convention(convention)
    scale = 1.0 / N if convention == PAPER_CONVENTION else 1.0 / np.sqrt(N)
    grid = np.arange(N)
    return scale * np.exp(-2j * np.pi * np.outer(grid, grid) / N)


def _check_convention(convention: str):
    if convention not in CONVENTIONS:
        raise InvalidInputError(
            f"unknown DFT convention {convention!r}; expected one of {CONVENTIONS}"
        )


def generate_channel(cfg: ChannelConfig, rng) -> ChannelMatrix:
    """Draw one K x N multipath channel realization.

    ``rng`` is a master integer seed or a SeedSequence; every user draws
    from its own substream so the result does not depend on evaluation
    order.  AoDs are continuous uniform on [-aod_limit, +aod_limit]; the
    first path is LoS.  Under the "constant" gain model each path gain is
    sqrt(power) * exp(j*phi) with phi uniform on [0, 2*pi); "rayleigh"
    scales a standard complex Gaussian instead.
    """
    seq = _as_seedseq(rng)
    powers = cfg.path_powers()
    limit = np.deg2rad(cfg.aod_limit_deg)
    n_idx = np.arange(cfg.N)

    data = np.empty((cfg.K, cfg.N), dtype=np.complex128)
    all_paths = []
    for k in range(cfg.K):
        user_rng = np.random.default_rng(_child_seed(seq, k))
        aods = user_rng.uniform(-limit, limit, size=cfg.paths_per_user)
        if cfg.gain_model == "constant":
            phases = user_rng.uniform(0.0, 2.0 * np.pi, size=cfg.paths_per_user)
            gains = np.sqrt(powers) * np.exp(1j * phases)
        else:
            re = user_rng.standard_normal(cfg.paths_per_user)
            im = user_rng.standard_normal(cfg.paths_per_user)
            gains = np.sqrt(powers / 2.0) * (re + 1j * im)
        u_freqs = np.pi * np.sin(aods)
        # row_k = sum_l gain_l * exp(j*n*u_l)
        data[k] = (gains[:, None] * np.exp(1j * np.outer(u_freqs, n_idx))).sum(axis=0)
        all_paths.append(
            [
                PathSpec(gain=complex(g), angle_of_departure=float(a), is_los=(l == 0))
                for l, (g, a) in enumerate(zip(gains, aods))
            ]
        )
    return ChannelMatrix(data=data, K=cfg.K, N=cfg.N, paths=all_paths)


def to_beamspace(H, convention: str = PAPER_CONVENTION) -> BeamspaceChannel:
    """Apply the DFT beamformer: H_tilde = H @ F.

    Computed with an FFT along the beam axis, which equals the explicit
    matrix product to rounding.
    """
    _check_convention(convention)
    data = H.data if isinstance(H, ChannelMatrix) else np.asarray(H)
    if data.ndim != 2:
        raise InvalidInputError(f"channel must be a 2-D matrix, got shape {data.shape}")
    N = data.shape[1]
    scale = 1.0 / N if convention == PAPER_CONVENTION else 1.0 / np.sqrt(N)
    return BeamspaceChannel(data=np.fft.fft(data, axis=1) * scale, scaling_convention=convention)


def channel_array(H) -> np.ndarray:
    """Unwrap ChannelMatrix/BeamspaceChannel to the raw complex matrix."""
    if isinstance(H, (ChannelMatrix, BeamspaceChannel)):
        return H.data
    return np.asarray(H)


def write_channel_dump(path, matrix, convention=None):
    """Write one matrix in the binary dump format.

    24-byte header (magic "BSCH", K, N as little-endian int32, convention
    byte, zero padding) followed by row-major interleaved real/imag
    float64 samples.
    """
    data = channel_array(matrix)
    if isinstance(matrix, BeamspaceChannel) and convention is None:
        convention = matrix.scaling_convention
    if convention not in DUMP_CONVENTION_BYTES:
        raise InvalidInputError(f"unknown dump convention {convention!r}")
    K, N = data.shape
    header = DUMP_HEADER.pack(DUMP_MAGIC, K, N, DUMP_CONVENTION_BYTES[convention])
    interleaved = np.empty((K, N, 2), dtype="<f8")
    interleaved[..., 0] = data.real
    interleaved[..., 1] = data.imag
    with open(path, "wb") as fh:
        fh.write(header)
        fh.write(interleaved.tobytes())


def read_channel_dump(path):
    """Read a dump file; returns (matrix, convention or None for antenna domain)."""
    with open(path, "rb") as fh:
        raw = fh.read()
    if len(raw) < DUMP_HEADER.size:
        raise InvalidInputError(f"{path}: truncated dump header")
    magic, K, N, conv_byte = DUMP_HEADER.unpack_from(raw)
    if magic != DUMP_MAGIC:
        raise InvalidInputError(f"{path}: bad magic {magic!r}")
    if conv_byte not in DUMP_BYTE_CONVENTIONS:
        raise InvalidInputError(f"{path}: unknown convention byte {conv_byte}")
    body = np.frombuffer(raw, dtype="<f8", offset=DUMP_HEADER.size)
    if body.size != 2 * K * N:
        raise InvalidInputError(f"{path}: expected {2 * K * N} samples, got {body.size}")
    body = body.reshape(K, N, 2)
    return body[..., 0] + 1j * body[..., 1], DUMP_BYTE_CONVENTIONS[conv_byte]
