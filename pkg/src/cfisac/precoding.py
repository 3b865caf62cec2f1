"""Downlink precoding and the communication-side performance expressions.

UE streams use regularized zero-forcing over the stacked multi-AP channel;
the probing stream pointed at the sensing point uses the matched (MRT)
direction. All vectors are unit norm so transmit powers factor out into the
power coefficients rho.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .scene import ChannelSet


@dataclass(frozen=True)
class PrecoderSet:
    """Unit-norm precoding vectors, one row per stream.

    Row 0 is the sensing stream, rows 1..K the UE streams, each of length
    L*M stacked AP by AP.
    """

    vectors: np.ndarray  # (K+1, L*M)
    antennas_per_ap: int
    rzf_regularizer: float

    def __post_init__(self):
        vec = np.ascontiguousarray(np.asarray(self.vectors, complex))
        if vec.ndim != 2:
            raise ValueError(f"vectors must be 2D, got shape {vec.shape}")
        if vec.shape[1] % self.antennas_per_ap:
            raise ValueError(
                f"row length {vec.shape[1]} is not a multiple of M={self.antennas_per_ap}"
            )
        norms = np.linalg.norm(vec, axis=1)
        if not np.allclose(norms, 1.0, atol=1e-9):
            raise ValueError("precoding vectors must be unit norm")
        vec.flags.writeable = False
        object.__setattr__(self, "vectors", vec)

    @property
    def num_streams(self) -> int:
        return self.vectors.shape[0]

    @property
    def num_aps(self) -> int:
        return self.vectors.shape[1] // self.antennas_per_ap

    def ap_slice(self, stream: int, ap: int) -> np.ndarray:
        """Per-AP sub-vector of one stream's precoder."""
        M = self.antennas_per_ap
        return self.vectors[stream, ap * M : (ap + 1) * M]

    def sensing_slices(self) -> np.ndarray:
        """Sensing-stream precoder reshaped to (L, M)."""
        return self.vectors[0].reshape(self.num_aps, self.antennas_per_ap)

    def per_ap_norms(self) -> np.ndarray:
        """(L, K+1) matrix of ||w_{stream, ap}||^2; rows sum to 1 per stream."""
        L, M = self.num_aps, self.antennas_per_ap
        blocks = self.vectors.reshape(self.num_streams, L, M)
        return np.transpose(np.sum(np.abs(blocks) ** 2, axis=2))


@dataclass(frozen=True)
class PowerAllocation:
    """Per-stream transmit power coefficients, index 0 the sensing stream."""

    coefficients: np.ndarray  # (K+1,)
    max_ap_power: float

    def __post_init__(self):
        coeff = np.asarray(self.coefficients, dtype=float)
        if np.any(coeff < 0):
            raise ValueError("power coefficients must be nonnegative")
        coeff = np.ascontiguousarray(coeff)
        coeff.flags.writeable = False
        object.__setattr__(self, "coefficients", coeff)
        if self.max_ap_power <= 0:
            raise ValueError("max_ap_power must be positive")


def rzf_precoders(ue_channels: np.ndarray, regularizer: float) -> np.ndarray:
    """Regularized zero-forcing directions, one unit-norm row per UE.

    Solves (sum_j h_j h_j^H + reg I) w = h_k on the stacked L*M channel and
    normalizes. With reg = 0 and fewer UEs than antennas the Gram matrix is
    singular and numpy raises LinAlgError; callers wanting plain ZF should
    pass a tiny positive ridge instead.
    """
    H = np.asarray(ue_channels, dtype=complex)
    K, dim = H.shape
    # sum_j h_j h_j^H with rows of H holding the h_j entries
    gram = H.T @ H.conj() + regularizer * np.eye(dim)
    # LU happily "solves" a rank-deficient Gram when the system is consistent
    # (K < dim always leaves a null space), picking an arbitrary point of the
    # solution manifold; reject that case by rank check instead
    spectrum = np.linalg.eigvalsh(gram)
    if spectrum[0] <= dim * np.finfo(float).eps * max(spectrum[-1], 0.0):
        raise np.linalg.LinAlgError(
            "singular RZF system; pass a positive regularizer"
        )
    # one factorization for all K right-hand sides
    W = np.linalg.solve(gram, H.T)  # (dim, K), column k solves for UE k
    W = W.T
    norms = np.linalg.norm(W, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise ValueError("zero RZF direction: degenerate channel row")
    return W / norms


def mrt_sensing_precoder(target_channel: np.ndarray) -> np.ndarray:
    """Matched direction w = h / ||h|| toward the sensing point."""
    h = np.asarray(target_channel, dtype=complex)
    norm = np.linalg.norm(h)
    if norm == 0:
        raise ValueError("target channel is zero; cannot form sensing precoder")
    return h / norm


def build_precoders(
    channels: ChannelSet, regularizer: float, antennas_per_ap: int
) -> PrecoderSet:
    """Stack the MRT sensing row on top of the RZF UE rows."""
    w0 = mrt_sensing_precoder(channels.target_channel)
    K = channels.ue_channels.shape[0]
    if K:
        wk = rzf_precoders(channels.ue_channels, regularizer)
        vectors = np.vstack([w0[None, :], wk])
    else:
        vectors = w0[None, :]
    return PrecoderSet(
        vectors=vectors, antennas_per_ap=antennas_per_ap, rzf_regularizer=regularizer
    )


def per_ap_power(precoders: PrecoderSet, powers: PowerAllocation, ap_index: int) -> float:
    """Transmit power of one AP: sum_k rho_k ||w_{k, ap}||^2."""
    norms = precoders.per_ap_norms()  # (L, K+1)
    if not 0 <= ap_index < norms.shape[0]:
        raise IndexError(f"ap_index {ap_index} outside 0..{norms.shape[0] - 1}")
    return float(norms[ap_index] @ powers.coefficients)


def stream_gains(channels: ChannelSet, precoders: PrecoderSet) -> np.ndarray:
    """(K, K+1) table of |h_k^H w_j|^2, column 0 the sensing stream."""
    inner = channels.ue_channels.conj() @ precoders.vectors.T  # (K, K+1)
    return np.abs(inner) ** 2


def ue_sinr(
    channels: ChannelSet,
    precoders: PrecoderSet,
    powers: PowerAllocation,
    ue_index: int,
) -> float:
    """Downlink SINR of one UE under the given power split.

    gamma_k = rho_k |h_k^H w_k|^2 /
              (sum_{j != k} rho_j |h_k^H w_j|^2 + rho_0 |h_k^H w_0|^2 + noise)
    """
    K = channels.ue_channels.shape[0]
    if not 0 <= ue_index < K:
        raise IndexError(f"ue_index {ue_index} outside 0..{K - 1}")
    rho = powers.coefficients
    h = channels.ue_channels[ue_index]
    inner = np.abs(h.conj() @ precoders.vectors.T) ** 2  # (K+1,)
    signal = rho[ue_index + 1] * inner[ue_index + 1]
    interference = float(rho @ inner) - signal
    return float(signal / (interference + channels.noise_power))
