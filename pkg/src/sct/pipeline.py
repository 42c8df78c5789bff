"""End-to-end trial execution for the digital, analog, and baseline chains.

One trial: source -> block transform -> importance -> per-label streams ->
mode + budget allocation -> channel realization -> RB assignment ->
transmission -> decoding -> error masking -> region synthesis -> correction
-> reconstruction -> metrics.

Randomness is split into two child generators of the trial seed: one for the
fading gains, one for channel noise, consumed in a fixed transmission order
(side info first, then streams in plan order) so runs are reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from . import allocation as alloc
from . import analog as ana
from . import correction as corr
from . import digital as dig
from . import metrics as met
from . import semantics as sem
from . import source_io as sio
from .bitstream import bits_to_bytes, bytes_to_bits
from .config import TrialConfig
from .convcode import transmit

GAIN_STREAM = 101
NOISE_STREAM = 202


@dataclass
class TrialResult:
    report: met.ReconstructionReport
    image: np.ndarray                 # reconstructed (h, w) uint8
    original: np.ndarray              # source (h, w) uint8
    clean_image: np.ndarray           # zero-noise rendering of the same plan
    coeffs: np.ndarray                # receiver feature map (rows, cols, 64)
    mask: np.ndarray                  # (rows, cols) bool, post-synthesis
    grid: sio.BlockGrid
    importance: np.ndarray            # (rows, cols)
    block_labels: np.ndarray          # (rows, cols)
    pixel_labels: np.ndarray          # (h, w)
    mode: Optional[str]
    plan: Optional[alloc.AllocationPlan]
    budget: int
    symbols_used: int
    side_info_symbols: int
    flags: Tuple[str, ...]


@dataclass
class _Scene:
    """Transmitter-side view of the source, shared by all chains."""
    image: sio.SourceImage
    pixel_labels: np.ndarray
    grid: sio.BlockGrid
    fm: sem.FeatureMap
    labels: sio.SemanticLabelMap
    importance: sem.ImportanceMap
    sfvs: List[sem.Sfv]
    fills: np.ndarray                 # (L,) uint8


def load_scene(cfg: TrialConfig) -> _Scene:
    """Build the shared transmitter-side view (also used by experiments)."""
    if cfg.source_path is not None:
        img = sio.load_image(cfg.source_path)
        if cfg.labels_path is not None:
            labmap = sio.load_label_map(cfg.labels_path,
                                        (img.width, img.height))
        else:
            labmap = sio.PixelLabelMap(
                img.width, img.height,
                np.zeros_like(img.samples, dtype=np.int64))
    else:
        img, labmap = sio.synthesize_source(cfg.source_pattern,
                                            cfg.source_size, cfg.source_seed)
    padded, grid = sio.pad_and_grid(img)
    fm = sem.forward_transform(padded, grid)
    labels = sio.block_labels(labmap, grid)
    ent = sem.entropy_map(fm)
    if cfg.importance_mode == "mtc":
        refinement = sem.load_activation_map(cfg.activation_path, grid)
    else:
        refinement = sem.saliency_map(fm)
    imp = sem.fuse_importance(ent, refinement, cfg.importance_w)
    sfvs = sem.segment_sfvs(fm, labels, imp)
    fills = np.zeros(labels.n_labels, dtype=np.uint8)
    for lab in range(labels.n_labels):
        sel = labmap.labels == lab
        fills[lab] = int(np.clip(np.round(img.samples[sel].mean()), 0, 255)) \
            if sel.any() else corr.DEFAULT_FILL
    return _Scene(img, labmap.labels, grid, fm, labels, imp, sfvs, fills)


def _rngs(seed: int) -> Tuple[np.random.Generator, np.random.Generator]:
    gains = np.random.default_rng(np.random.SeedSequence((seed, GAIN_STREAM)))
    noise = np.random.default_rng(np.random.SeedSequence((seed, NOISE_STREAM)))
    return gains, noise


def _channel(cfg: TrialConfig, budget: int,
             rng: np.random.Generator) -> alloc.ChannelRealization:
    n_rb = cfg.n_rb if cfg.n_rb > 0 else alloc.derive_n_rb(budget, cfg.n_re)
    ch_cfg = alloc.ChannelConfig(snr_db=cfg.snr_db, fading=cfg.fading,
                                 n_rb=n_rb, n_re=cfg.n_re, seed=cfg.seed)
    return alloc.realize_channel(ch_cfg, rng=rng)


def _send_bits(info_bits: np.ndarray, rb_ids: List[int],
               ch: alloc.ChannelRealization, n_re: int,
               rng: np.random.Generator) -> np.ndarray:
    """Conv-code, modulate, transmit, demodulate, Viterbi-decode one frame."""
    symbols = dig.sfv_frame_symbols(info_bits)
    received, sym_gains = transmit(symbols, rb_ids, ch, n_re, rng)
    return dig.sfv_frame_decode(received, sym_gains, ch.noise_var,
                                info_bits.size)


def _render(fm: sem.FeatureMap, grid: sio.BlockGrid) -> np.ndarray:
    return sem.inverse_transform(fm, grid).samples


def _finish_sct(cfg: TrialConfig, grid: sio.BlockGrid, fm_rx: sem.FeatureMap,
                mask: corr.ErrorMask, dropped_labels: List[int],
                si: Optional[alloc.SideInfo], mode: str) -> np.ndarray:
    """Common receiver tail: synthesis of dropped regions, then correction."""
    if si is not None:
        labels_arr = si.labels
        fills = {lab: int(si.fills[lab]) for lab in range(si.fills.size)}
    else:
        labels_arr = np.zeros((grid.rows, grid.cols), dtype=np.int64)
        fills = {}
    if mode == "selective" and si is not None:
        corr.synthesize_dropped_regions(fm_rx, labels_arr, mask,
                                        dropped_labels, fills)
    if cfg.correction_enabled:
        corr.inpaint_feature_map(fm_rx, labels_arr, mask, fills)
    return _render(fm_rx, grid)


def run_trial(cfg: TrialConfig) -> TrialResult:
    cfg.validate()
    scene = load_scene(cfg)
    budget = alloc.total_budget(cfg.rate_r, scene.image.width,
                                scene.image.height)
    if cfg.chain == "baseline":
        return _run_baseline(cfg, scene, budget)
    return _run_sct(cfg, scene, budget)


# ---------------------------------------------------------------------------
# SCT chains (digital + analog)

def _drop_set(ordered: List[Tuple[int, float]], mode: str,
              drop_quantile: float) -> List[int]:
    if mode != "selective":
        return []
    arr = np.array([sc for _, sc in ordered])
    cut = float(np.quantile(arr, drop_quantile))
    return [lab for lab, sc in ordered if sc < cut]


def _run_sct(cfg: TrialConfig, scene: _Scene, budget: int) -> TrialResult:
    flags: List[str] = []
    grid = scene.grid
    by_label: Dict[int, sem.Sfv] = {s.label: s for s in scene.sfvs}
    mode = alloc.select_mode([s.score for s in scene.sfvs], cfg.alloc_tau)

    scored = [(s.label, s.score) for s in scene.sfvs]
    ordered = sorted(scored, key=lambda t: (-t[1], t[0]))
    dropped_labels = _drop_set(ordered, mode, cfg.alloc_drop_quantile)
    kept_labels = [lab for lab, _ in ordered if lab not in dropped_labels]

    # --- side info assembly (transmitter side) ---
    si_bytes: Optional[bytes] = None
    record_labels: Tuple[int, ...] = ()
    tx_records: Dict[int, alloc.BandRecord] = {}
    if cfg.chain == "digital":
        if mode == "selective":
            candidate = alloc.encode_label_side_info(scene.labels.labels,
                                                     scene.fills)
            if alloc.side_info_symbol_cost(len(candidate)) \
                    > cfg.side_info_max_frac * budget:
                # selective with unaffordable side info would be strictly
                # worse than overall coding: fall back
                mode = "overall"
                dropped_labels = []
                kept_labels = [lab for lab, _ in ordered]
                flags.append("side-info-guardrail")
            else:
                si_bytes = candidate
    else:  # analog always ships side info; the cap picks the record tier
        records = [ana.make_band_record(lab, by_label[lab].coeffs,
                                        alloc.BAND_FULL)
                   for lab in kept_labels]
        si_bytes = alloc.encode_side_info(scene.labels.labels, scene.fills,
                                          records)
        if alloc.side_info_symbol_cost(len(si_bytes)) \
                > cfg.side_info_max_frac * budget:
            # placeholder sigmas: the scalar tier pools over the transmitted
            # prefix, which is only known after allocation; the stream
            # length depends on structure alone, so the cost is already firm
            records = [ana.make_band_record(lab, by_label[lab].coeffs,
                                            alloc.BAND_SCALAR)
                       for lab in kept_labels]
            si_bytes = alloc.encode_side_info(scene.labels.labels,
                                              scene.fills, records)
        record_labels = tuple(kept_labels)
        tx_records = {rec.label: rec for rec in records}
    si_cost = alloc.side_info_symbol_cost(len(si_bytes)) if si_bytes else 0

    # --- allocation + channel ---
    plan = alloc.allocate_budgets(scored, budget, mode,
                                  cfg.alloc_drop_quantile, cfg.alloc_n_min,
                                  side_info_symbols=si_cost)
    rng_gain, rng_noise = _rngs(cfg.seed)
    ch = _channel(cfg, budget, rng_gain)
    plan = alloc.assign_rbs(plan, ch, cfg.n_re, cfg.capacity_aligned)
    if any(e.truncated for e in plan.entries):
        flags.append("truncated")
    if cfg.chain == "analog" and record_labels \
            and tx_records[record_labels[0]].mode == alloc.BAND_SCALAR:
        final_n = {e.label: e.n_symbols for e in plan.entries
                   if not e.dropped}
        records = [ana.make_band_record(lab, by_label[lab].coeffs,
                                        alloc.BAND_SCALAR, final_n[lab])
                   for lab in kept_labels]
        si_bytes = alloc.encode_side_info(scene.labels.labels, scene.fills,
                                          records)
        tx_records = {rec.label: rec for rec in records}

    # --- side info over the air ---
    si_rx: Optional[alloc.SideInfo] = None
    if si_bytes is not None:
        if len(plan.side_info_rb_ids) * cfg.n_re >= si_cost:
            si_bits = bytes_to_bits(si_bytes)
            rx_bits = _send_bits(si_bits, plan.side_info_rb_ids, ch,
                                 cfg.n_re, rng_noise)
            si_rx = alloc.decode_side_info(bits_to_bytes(rx_bits),
                                           record_labels)
        if si_rx is None or si_rx.labels.shape != (grid.rows, grid.cols):
            si_rx = None
            flags.append("side-info-lost")

    # --- per-SFV transmission ---
    fm_rx = sem.FeatureMap(grid.cols, grid.rows,
                           np.zeros((grid.rows, grid.cols, 64)))
    fm_clean = sem.FeatureMap(grid.cols, grid.rows,
                              np.zeros((grid.rows, grid.cols, 64)))
    bad: List[Tuple[int, int]] = []
    clean_bad: List[Tuple[int, int]] = []

    if cfg.chain == "digital":
        symbols_used = _digital_streams(cfg, plan, ch, rng_noise, by_label,
                                        fm_rx, fm_clean, bad, clean_bad,
                                        flags)
    else:
        symbols_used = _analog_streams(cfg, plan, ch, rng_noise, by_label,
                                       tx_records, si_rx, fm_rx, fm_clean,
                                       bad, clean_bad, flags)
    mask = corr.build_mask(grid.cols, grid.rows, bad)

    # --- receiver tail, once for the real decode and once for the zero-noise
    #     reference (same plan, clean side info) ---
    si_tx_view = alloc.decode_side_info(si_bytes, record_labels) \
        if si_bytes is not None else None
    clean_mask = corr.build_mask(grid.cols, grid.rows, clean_bad)
    clean_image = _finish_sct(cfg, grid, fm_clean, clean_mask,
                              dropped_labels, si_tx_view, mode)
    image = _finish_sct(cfg, grid, fm_rx, mask, dropped_labels, si_rx, mode)

    flag_tuple = tuple(dict.fromkeys(flags))
    report = met.compute_metrics(
        scene.image.samples, image, grid, scene.importance.values,
        scene.pixel_labels, mask.fraction, mode,
        side_info_symbols=si_cost, budget_symbols=budget, flags=flag_tuple)
    report.symbols_used = symbols_used
    return TrialResult(report, image, scene.image.samples, clean_image,
                       fm_rx.coeffs, mask.flags, grid,
                       scene.importance.values, scene.labels.labels,
                       scene.pixel_labels, mode, plan, budget, symbols_used,
                       si_cost, flag_tuple)


def _digital_streams(cfg: TrialConfig, plan: alloc.AllocationPlan,
                     ch: alloc.ChannelRealization,
                     rng_noise: np.random.Generator,
                     by_label: Dict[int, sem.Sfv],
                     fm_rx: sem.FeatureMap, fm_clean: sem.FeatureMap,
                     bad: List[Tuple[int, int]],
                     clean_bad: List[Tuple[int, int]],
                     flags: List[str]) -> int:
    symbols_used = 0
    for entry in plan.entries:
        sfv = by_label[entry.label]
        rr, cc = sfv.blocks[:, 0], sfv.blocks[:, 1]
        if entry.dropped or entry.n_symbols <= 0:
            bad.extend(map(tuple, sfv.blocks))
            clean_bad.extend(map(tuple, sfv.blocks))
            continue
        tx = dig.encode_sfv_digital(entry.label, sfv.coeffs, entry.n_symbols,
                                    cfg.payload_bits)
        if tx.all_zero:
            flags.append("rate-floor")
        covered = np.zeros(sfv.n_blocks, dtype=bool)
        covered[:tx.covered] = True
        coeffs_clean = dig.dequantize(tx.indices, tx.step)
        fm_clean.coeffs[rr[covered], cc[covered]] = coeffs_clean[covered]
        clean_bad.extend(map(tuple, sfv.blocks[~covered]))
        if tx.info_bits.size == 0:
            bad.extend(map(tuple, sfv.blocks))
            continue
        symbols_used += tx.symbols_used
        rx_bits = _send_bits(tx.info_bits, entry.rb_ids, ch, cfg.n_re,
                             rng_noise)
        indices, ok = dig.decode_sfv_digital(rx_bits, sfv.n_blocks)
        coeffs_hat = dig.dequantize(indices, tx.step)
        fm_rx.coeffs[rr[ok], cc[ok]] = coeffs_hat[ok]
        bad.extend(map(tuple, sfv.blocks[~ok]))
    return symbols_used


def _analog_streams(cfg: TrialConfig, plan: alloc.AllocationPlan,
                    ch: alloc.ChannelRealization,
                    rng_noise: np.random.Generator,
                    by_label: Dict[int, sem.Sfv],
                    tx_records: Dict[int, alloc.BandRecord],
                    si_rx: Optional[alloc.SideInfo],
                    fm_rx: sem.FeatureMap, fm_clean: sem.FeatureMap,
                    bad: List[Tuple[int, int]],
                    clean_bad: List[Tuple[int, int]],
                    flags: List[str]) -> int:
    kept = [e for e in plan.entries if not e.dropped and e.n_symbols > 0]
    powers = {e.label: p for e, p in
              zip(kept, ana.power_allocate([e.score for e in kept],
                                           [e.n_symbols for e in kept]))} \
        if kept else {}
    rx_records: Dict[int, alloc.BandRecord] = \
        {rec.label: rec for rec in si_rx.band_records} if si_rx else {}
    symbols_used = 0
    for entry in plan.entries:
        sfv = by_label[entry.label]
        rr, cc = sfv.blocks[:, 0], sfv.blocks[:, 1]
        if entry.dropped or entry.n_symbols <= 0:
            bad.extend(map(tuple, sfv.blocks))
            clean_bad.extend(map(tuple, sfv.blocks))
            continue
        p = powers[entry.label]
        sigmas_tx = ana.record_sigmas(tx_records[entry.label])
        frame = ana.analog_encode(sfv.coeffs, entry.n_symbols, p, sigmas_tx,
                                  entry.label)
        zonal = sfv.coeffs.T.ravel().copy()   # zero-noise reference:
        zonal[frame.kept:] = 0.0              # zonal truncation only
        fm_clean.coeffs[rr, cc] = zonal.reshape(64, sfv.n_blocks).T
        if frame.symbols.size == 0:
            continue
        symbols_used += frame.symbols.size
        received, sym_gains = transmit(frame.symbols, entry.rb_ids, ch,
                                       cfg.n_re, rng_noise)
        rec = rx_records.get(entry.label)
        if rec is not None:
            sigmas_rx = ana.record_sigmas(rec)
        else:
            sigmas_rx = np.full(64, cfg.fallback_scale)
            flags.append("analog-degraded")
        fm_rx.coeffs[rr, cc] = ana.lmmse_decode(
            received, sym_gains, ch.noise_var, p, sigmas_rx, sfv.n_blocks,
            frame.kept)
        entry_gains = ch.gains[np.asarray(entry.rb_ids, dtype=np.int64)]
        if ana.flagged_blocks(entry_gains, ch.noise_var, cfg.flag_threshold):
            flags.append("analog-flagged")
            bad.extend(map(tuple, sfv.blocks))
    return symbols_used


# ---------------------------------------------------------------------------
# classical single-stream baseline

def _run_baseline(cfg: TrialConfig, scene: _Scene, budget: int) -> TrialResult:
    grid = scene.grid
    n_blocks = grid.rows * grid.cols
    coeffs = scene.fm.coeffs.reshape(n_blocks, 64)
    tx = dig.baseline_encode(coeffs, budget)

    rng_gain, rng_noise = _rngs(cfg.seed)
    ch = _channel(cfg, budget, rng_gain)
    n_rb_used = int(np.ceil(tx.symbols_used / cfg.n_re))
    rb_ids = list(range(min(n_rb_used, ch.gains.size)))  # natural order
    rx_bits = _send_bits(tx.info_bits, rb_ids, ch, cfg.n_re, rng_noise)
    rx_indices, _crc_ok, clean = dig.baseline_decode(rx_bits, n_blocks)

    def assemble(indices: np.ndarray, upto: int) -> np.ndarray:
        full = np.zeros((n_blocks, 64))
        full[:upto] = dig.dequantize(indices[:upto], tx.step)
        return full.reshape(grid.rows, grid.cols, 64)

    rx_coeffs = assemble(rx_indices, min(clean, n_blocks))
    image = _render(sem.FeatureMap(grid.cols, grid.rows, rx_coeffs), grid)
    clean_image = _render(sem.FeatureMap(grid.cols, grid.rows,
                                         assemble(tx.indices, tx.covered)),
                          grid)
    mask_flags = np.zeros((grid.rows, grid.cols), dtype=bool)
    mask_flags.ravel()[min(clean, n_blocks):] = True

    report = met.compute_metrics(
        scene.image.samples, image, grid, scene.importance.values,
        scene.pixel_labels, float(mask_flags.mean()), None,
        side_info_symbols=0, budget_symbols=budget, flags=())
    report.symbols_used = tx.symbols_used
    return TrialResult(report, image, scene.image.samples, clean_image,
                       rx_coeffs, mask_flags, grid, scene.importance.values,
                       scene.labels.labels, scene.pixel_labels, None, None,
                       budget, tx.symbols_used, 0, ())
