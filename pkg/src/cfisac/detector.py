"""Multi-static detection of a reflecting target from accumulated receive symbols.

Each receive AP correlates its observations against the known probing stream;
stacking the per-path amplitudes gives a block-diagonal response whose Gram
matrix has at most one nonzero eigenvalue per receive AP. The detector applies
the MAP-ratio quadratic form to the accumulated vector and compares against a
threshold calibrated to a target false-alarm probability by Monte Carlo.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .scene import ChannelSet, SteeringAngles, array_response

_CHUNK = 1 << 15  # trials per vectorized block; fixed so runs are reproducible


@dataclass(frozen=True)
class SensingModel:
    """Per-path response amplitudes and the spectral data derived from them.

    receiver_gains[r, l] = sqrt(two-hop gain) * (steering vector of tx AP l)^H
    (its probing sub-precoder); block_rows is the (R, R*L) block-diagonal
    stacking with row r holding receiver_gains[r] in its own column block.
    gram_eigenvalues/-vectors factor block_rows^H block_rows; at most R
    eigenvalues are nonzero, one per receive AP.
    """

    receiver_gains: np.ndarray  # (R, L) complex
    block_rows: np.ndarray  # (R, R*L) complex
    gram_eigenvalues: np.ndarray  # (R*L,) real, descending
    gram_eigenvectors: np.ndarray  # (R*L, R*L) complex, columns match eigenvalues
    antennas_per_ap: int

    @property
    def num_receivers(self) -> int:
        return self.receiver_gains.shape[0]

    @property
    def num_transmitters(self) -> int:
        return self.receiver_gains.shape[1]


@dataclass(frozen=True)
class DetectorMatrix:
    """Quadratic-form kernel of the detector at one operating point."""

    matrix: np.ndarray  # (R, R) Hermitian PSD
    sensing_power: float
    blocklength: float
    noise_power: float


@dataclass(frozen=True)
class DetectionResult:
    threshold: float
    p_fa_target: float
    p_fa_empirical: float
    p_d: float
    trials: int


def assemble_sensing_model(
    channels: ChannelSet, angles: SteeringAngles, sensing_slices: np.ndarray
) -> SensingModel:
    """Build the per-path amplitude stack for the current sensing point.

    :param sensing_slices: (L, M) per-AP sub-vectors of the probing precoder
    """
    gains = channels.sensing_gains  # (R, L)
    R, L = gains.shape
    slices = np.asarray(sensing_slices, dtype=complex)
    if slices.shape[0] != L:
        raise ValueError(
            f"sensing_slices has {slices.shape[0]} AP rows, expected {L}"
        )
    M = slices.shape[1]
    steer = np.stack(
        [array_response(angles.tx_azimuth[l], angles.tx_elevation[l], M) for l in range(L)]
    )
    beam = np.einsum("lm,lm->l", steer.conj(), slices)  # steering^H sub-precoder
    receiver_gains = np.sqrt(gains) * beam[None, :]
    block = np.zeros((R, R * L), dtype=complex)
    for r in range(R):
        block[r, r * L : (r + 1) * L] = receiver_gains[r]
    gram = block.conj().T @ block
    eigval, eigvec = np.linalg.eigh(gram)
    order = np.argsort(eigval)[::-1]
    eigval = np.maximum(eigval[order], 0.0)
    eigvec = eigvec[:, order]
    return SensingModel(
        receiver_gains=receiver_gains,
        block_rows=block,
        gram_eigenvalues=eigval,
        gram_eigenvectors=eigvec,
        antennas_per_ap=M,
    )


def detector_matrix(
    model: SensingModel, sensing_power: float, blocklength: float, noise_power: float
) -> DetectorMatrix:
    """Kernel B = M rho0 beta^T (M rho0 tau beta* beta^T + sigma^2 I)^(-1) beta*."""
    if sensing_power < 0:
        raise ValueError("sensing_power must be nonnegative")
    if blocklength <= 0:
        raise ValueError("blocklength must be positive")
    if noise_power <= 0:
        raise ValueError("noise_power must be positive")
    M = model.antennas_per_ap
    block = model.block_rows
    n = block.shape[1]
    gram = block.conj().T @ block
    core = M * sensing_power * blocklength * gram + noise_power * np.eye(n)
    # solve instead of inverting; core is Hermitian positive definite
    solved = np.linalg.solve(core, block.conj().T)  # (R*L, R)
    B = M * sensing_power * (block @ solved)
    B = 0.5 * (B + B.conj().T)  # clean up asymmetry at machine precision
    return DetectorMatrix(
        matrix=B,
        sensing_power=sensing_power,
        blocklength=blocklength,
        noise_power=noise_power,
    )


def test_statistic(accumulated: np.ndarray, detector: DetectorMatrix) -> float:
    """T = y^H B y for one accumulated receive vector y (length R)."""
    y = np.asarray(accumulated, dtype=complex)
    return float(np.real(y.conj() @ detector.matrix @ y))


def expected_statistic(
    model: SensingModel,
    sensing_power: float,
    blocklength: float,
    noise_power: float,
    target_present: bool,
) -> float:
    """Closed-form mean of T under either hypothesis (trace form)."""
    if sensing_power == 0:
        return 0.0
    M = model.antennas_per_ap
    block = model.block_rows
    n = block.shape[1]
    gram = block.conj().T @ block
    core = M * sensing_power * blocklength * gram + noise_power * np.eye(n)
    X = np.linalg.solve(core, gram)  # core^(-1) gram
    mean = blocklength * noise_power * M * sensing_power * np.trace(X).real
    if target_present:
        mean += (blocklength * M * sensing_power) ** 2 * np.trace(X @ gram).real
    return float(mean)


def statistic_gap(
    eigenvalues: np.ndarray,
    antennas_per_ap: int,
    sensing_power: float,
    blocklength: float,
    noise_power: float,
) -> float:
    """Mean separation E[T | target] - E[T | noise] from the Gram spectrum.

    gap = (M tau rho0)^2 sum_i d_i^2 / (M rho0 tau d_i + sigma^2); zero
    eigenvalues contribute nothing, so padded spectra are fine.
    """
    d = np.asarray(eigenvalues, dtype=float)
    M = antennas_per_ap
    num = (M * blocklength * sensing_power) ** 2 * d**2
    den = M * sensing_power * blocklength * d + noise_power
    return float(np.sum(num / den))


def sample_statistics(
    model: SensingModel,
    sensing_power: float,
    blocklength: float,
    noise_power: float,
    trials: int,
    rng,
    *,
    target_present: bool,
    signal_power: float | None = None,
) -> np.ndarray:
    """Monte Carlo draws of T.

    The kernel always assumes `sensing_power`; under the target hypothesis the
    echo is transmitted with `signal_power` (defaults to the same value).
    Splitting the two lets a zero-power probe be scored by a detector built
    for a live one.
    """
    if trials <= 0:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(rng)
    det = detector_matrix(model, sensing_power, blocklength, noise_power)
    B = det.matrix
    R = model.num_receivers
    n = model.block_rows.shape[1]
    if signal_power is None:
        signal_power = sensing_power
    amp = blocklength * np.sqrt(model.antennas_per_ap * signal_power)
    noise_scale = np.sqrt(blocklength * noise_power / 2.0)
    out = np.empty(trials)
    done = 0
    while done < trials:
        m = min(_CHUNK, trials - done)
        if target_present:
            alpha = (
                rng.standard_normal((m, n)) + 1j * rng.standard_normal((m, n))
            ) / np.sqrt(2.0)
            y = amp * (alpha @ model.block_rows.T)
        else:
            y = np.zeros((m, R), dtype=complex)
        y = y + noise_scale * (
            rng.standard_normal((m, R)) + 1j * rng.standard_normal((m, R))
        )
        out[done : done + m] = np.einsum("ni,ij,nj->n", y.conj(), B, y).real
        done += m
    if not np.all(np.isfinite(out)):
        raise FloatingPointError("non-finite detector statistic encountered")
    return out


def statistic_weights(
    model: SensingModel,
    sensing_power: float,
    blocklength: float,
    noise_power: float,
    *,
    target_present: bool,
    signal_power: float | None = None,
) -> np.ndarray:
    """Spectral weights making T an exact weighted sum of unit exponentials.

    Under either hypothesis the accumulated vector is zero-mean circular
    Gaussian with covariance C (diagonal: the per-path blocks are disjoint
    across receive APs), so T = y^H B y has the law sum_i w_i E_i with
    E_i ~ Exp(1) i.i.d. and w_i the eigenvalues of C^(1/2) B C^(1/2). Only R
    weights are involved, which makes large Monte Carlo budgets cheap.
    """
    det = detector_matrix(model, sensing_power, blocklength, noise_power)
    R = model.num_receivers
    cov_diag = np.full(R, blocklength * noise_power)
    if target_present:
        echo = sensing_power if signal_power is None else signal_power
        path_power = np.sum(np.abs(model.receiver_gains) ** 2, axis=1)  # ||beta_r||^2
        cov_diag = cov_diag + blocklength**2 * model.antennas_per_ap * echo * path_power
    scale = np.sqrt(cov_diag)
    kernel = scale[:, None] * det.matrix * scale[None, :]
    return np.maximum(np.linalg.eigvalsh(kernel), 0.0)


def _sample_weighted_exponentials(weights: np.ndarray, trials: int, rng) -> np.ndarray:
    rng = np.random.default_rng(rng)
    out = np.empty(trials)
    done = 0
    while done < trials:
        m = min(_CHUNK, trials - done)
        out[done : done + m] = rng.standard_exponential((m, weights.size)) @ weights
        done += m
    return out


def calibrate_threshold(
    model: SensingModel,
    sensing_power: float,
    blocklength: float,
    noise_power: float,
    p_fa_target: float,
    trials: int,
    rng,
) -> float:
    """Empirical (1 - p_fa)-quantile of T under the noise-only hypothesis.

    A probe with zero power (or zero path gains) yields T identically zero;
    the returned threshold is then 0 and a RuntimeWarning flags that the
    detector is degenerate (it fires on everything).
    """
    if not 0.0 < p_fa_target < 1.0:
        raise ValueError("p_fa_target must lie in (0, 1)")
    weights = statistic_weights(
        model, sensing_power, blocklength, noise_power, target_present=False
    )
    if not np.any(weights > 0.0):
        warnings.warn(
            "degenerate detector: statistic is identically zero, threshold 0",
            RuntimeWarning,
            stacklevel=2,
        )
        return 0.0
    samples = _sample_weighted_exponentials(weights, trials, rng)
    return float(np.quantile(samples, 1.0 - p_fa_target))


def detection_probability(
    model: SensingModel,
    sensing_power: float,
    blocklength: float,
    noise_power: float,
    threshold: float,
    trials: int,
    rng,
    *,
    signal_power: float | None = None,
) -> float:
    """Fraction of target-present draws with T >= threshold (ties detect)."""
    weights = statistic_weights(
        model,
        sensing_power,
        blocklength,
        noise_power,
        target_present=True,
        signal_power=signal_power,
    )
    samples = _sample_weighted_exponentials(weights, trials, rng)
    return float(np.mean(samples >= threshold))


def evaluate_detection(
    model: SensingModel,
    sensing_power: float,
    blocklength: float,
    noise_power: float,
    p_fa_target: float,
    trials: int,
    seed,
) -> DetectionResult:
    """Calibrate, re-check the false alarm on fresh draws, and measure P_d.

    The three Monte Carlo stages use independent child streams spawned from
    `seed`, so results are reproducible and the empirical false alarm is
    honest (measured on draws the calibration never saw).
    """
    ss = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    calib_ss, fa_ss, pd_ss = ss.spawn(3)
    threshold = calibrate_threshold(
        model, sensing_power, blocklength, noise_power, p_fa_target, trials, calib_ss
    )
    null_weights = statistic_weights(
        model, sensing_power, blocklength, noise_power, target_present=False
    )
    fresh = _sample_weighted_exponentials(null_weights, trials, fa_ss)
    p_fa_emp = float(np.mean(fresh >= threshold))
    p_d = detection_probability(
        model, sensing_power, blocklength, noise_power, threshold, trials, pd_ss
    )
    return DetectionResult(
        threshold=threshold,
        p_fa_target=p_fa_target,
        p_fa_empirical=p_fa_emp,
        p_d=p_d,
        trials=trials,
    )
