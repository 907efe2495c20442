"""Experiment runner: the measurement protocol over a redundant topology.

Per frame, per repetition: release one synthetic input through the input
barrier, run every healthy replica with its faults applied, rendezvous on
the completion times the checker observes, compare bus traces under tight
coupling, vote, step the safety switch, and record latency samples plus a
JSON Lines trace of every event. Everything derives from the config seed;
two runs of the same config produce byte-identical traces and reports.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from .config import ExperimentConfig
from .coupling import (
    Complete,
    Tight,
    compare_bus_traces,
    distribute_input,
    estimate_ptp_offset,
    rendezvous,
    simulate_ptp_exchange,
)
from .errors import ConfigError, NoHealthyReplicas
from .eventsim import Device, EventQueue, Host, KernelTask, cycles_to_time, submit_kernel
from .faults import FaultEffects, apply_fault, flip_output_bits, flip_weight_bits
from .fixedpoint import argmax_index, tensor_digest
from .profiling import detect_outliers, histogram, ks_statistic, stats, write_histogram_csv
from .replica import HEALTHY, Replica, ReplicaOutput, gen_frame, gen_weights, infer
from .rng import Rng, derive_seed
from .voting import PASS, SafetySwitchState, Verdict, step_safety, vote

TRACE_FILENAME = "trace.jsonl"
REPORT_FILENAME = "report.json"


@dataclass
class _RoundState:
    frame_id: int
    repetition: int
    release_time: int
    input_tensor: object
    clean: tuple                      # (output, cycles, trace, digest, classification)
    arrivals: list = field(default_factory=list)
    outputs: dict = field(default_factory=dict)
    pending: dict = field(default_factory=dict)
    any_applied: bool = False


@dataclass
class ExperimentReport:
    config: ExperimentConfig
    samples: dict
    replica_stats: dict
    outliers: dict
    histograms: dict
    verdict_counts: dict
    safety_final: str
    safety_timeline: list
    fault_summary: dict
    skew: object
    bus: dict
    ptp: list

    def to_json_dict(self) -> dict:
        replicas = []
        for rid in sorted(self.samples):
            st = self.replica_stats[rid]
            out = self.outliers[rid]
            replicas.append(
                {
                    "replica_id": rid,
                    "samples": list(self.samples[rid]),
                    "stats": st.to_json_dict() if st is not None else None,
                    "outliers": out.to_json_dict() if out is not None else None,
                    "histogram": [
                        {"lower_edge_ns": hb.lower_edge, "count": hb.count}
                        for hb in self.histograms[rid]
                    ],
                }
            )
        return {
            "schema_version": 1,
            "config": self.config.to_json_dict(),
            "replicas": replicas,
            "verdict_counts": dict(self.verdict_counts),
            "safety": {"final_state": self.safety_final, "timeline": list(self.safety_timeline)},
            "faults": dict(self.fault_summary),
            "skew_ns": self.skew,
            "bus": dict(self.bus),
            "ptp": list(self.ptp),
        }


class ExperimentRunner:
    """One deterministic run of one experiment config."""

    def __init__(self, config: ExperimentConfig, trace_writer=None):
        self.cfg = config
        topo = config.topology
        self.topology = topo
        self.coupling = topo.coupling
        self.engine = topo.engine
        self.queue = EventQueue()
        self.queue.on_process = self._emit_record
        self._writer = trace_writer

        root = Rng(config.seed)
        self.weights = gen_weights(derive_seed(config.seed, "weights"), config.workload.arch)
        n = topo.replica_count
        self.replicas = []
        self.devices = []
        self.hosts = []
        self.feed_pairs = []
        for rid in range(n):
            self.replicas.append(
                Replica(
                    id=rid,
                    engine=topo.engine,
                    clock=topo.clocks[rid],
                    weights=self.weights,
                    faults=[spec for fr, spec in config.faults if fr == rid],
                    health=topo.health[rid],
                )
            )
            self.devices.append(Device(rid, topo.clocks[rid]))
            self.hosts.append(Host(topo.host_jitter[rid], root.child(f"host.{rid}")))
            self.feed_pairs.append((topo.feed_jitter[rid], root.child(f"feed.{rid}")))
        self.replica_faults = {rid: [] for rid in range(n)}
        for i, (rid, spec) in enumerate(config.faults):
            self.replica_faults[rid].append((spec, root.child(f"fault.{i}")))

        self.healthy_ids = [r.id for r in self.replicas if r.health == HEALTHY]
        self.clock_offsets = list(topo.clock_offsets_ns)
        self.ptp_corrections = [0] * n
        self.prev_output = [None] * n

        if isinstance(self.coupling, Tight):
            self._window_ns = max(
                cycles_to_time(self.coupling.skew_tolerance_cycles, topo.clocks[0]), 1
            )
        else:
            self._window_ns = self.coupling.rendezvous_window_ns

        self.samples = {rid: [] for rid in range(n)}
        self.skews = []
        self.verdict_counts = {"pass": 0, "mismatch": 0, "timeout": 0, "degraded": 0}
        self.safety = SafetySwitchState(debounce_threshold=topo.debounce_threshold)
        self.safety_timeline = []
        self.fault_injected = 0
        self.fault_detected = 0
        self.fault_masked_pass = 0
        self.fault_corrupted_pass = 0
        self.bus_comparisons = 0
        self.bus_divergences = 0
        self.ptp_info = []
        self._round = None

    # -- trace records ------------------------------------------------

    _INTERNAL_PAYLOAD_KEYS = frozenset({"emitted", "arrival_ns", "start_ns", "cycles"})

    def _emit_record(self, ev):
        if self._writer is None:
            return
        if ev.kind == "kernel_complete":
            if not ev.payload.get("emitted", True):
                return
            rec = {
                "t_ns": ev.time_ns,
                "seq": ev.seq,
                "kind": "completion",
                "frame_id": ev.payload["frame_id"],
                "repetition": ev.payload["repetition"],
                "replica_id": ev.payload["replica_id"],
                "turnaround_ns": ev.payload["turnaround_ns"],
                "compute_cycles": ev.payload["cycles"],
                "digest": ev.payload["digest"],
                "classification": ev.payload["classification"],
            }
        else:
            rec = {"t_ns": ev.time_ns, "seq": ev.seq, "kind": ev.kind}
            for key, value in ev.payload.items():
                if key not in self._INTERNAL_PAYLOAD_KEYS:
                    rec[key] = value
        self._writer(rec)

    # -- per-replica computation ---------------------------------------

    def _compute(self, rid, rs: _RoundState):
        effects = FaultEffects()
        applied = False
        for spec, frng in self.replica_faults[rid]:
            applied |= apply_fault(spec, effects, rs.frame_id, frng)
        if applied:
            rs.any_applied = True
        out, cycles, trace, digest, classification = rs.clean
        if effects.weight_flips:
            mutated = flip_weight_bits(self.weights, effects.weight_flips)
            out, cycles, trace = infer(mutated, rs.input_tensor, self.engine)
            digest = tensor_digest(out)
            classification = argmax_index(out)
        if effects.output_flips:
            out = flip_output_bits(out, effects.output_flips)
            digest = tensor_digest(out)
            classification = argmax_index(out)
        if effects.stuck and self.prev_output[rid] is not None:
            out = self.prev_output[rid]
            digest = tensor_digest(out)
            classification = argmax_index(out)
        return out, cycles, trace, digest, classification, effects

    def _on_delivery(self, ev):
        rs = self._round
        rid = ev.payload["replica_id"]
        out, cycles, trace, digest, classification, effects = self._compute(rid, rs)
        rs.pending[rid] = (out, cycles, trace, digest, classification, effects)
        task = KernelTask(
            cycles=cycles,
            extra_delay_ns=effects.extra_delay_ns,
            tag={
                "frame_id": rs.frame_id,
                "repetition": rs.repetition,
                "replica_id": rid,
                "emitted": not effects.drop,
                "digest": digest,
                "classification": classification,
            },
        )
        submit_kernel(self.queue, self.hosts[rid], self.devices[rid], task,
                      in_order=True, handler=self._on_completion)

    def _on_completion(self, ev):
        rs = self._round
        rid = ev.payload["replica_id"]
        out, cycles, trace, digest, classification, effects = rs.pending.pop(rid)
        if effects.drop:
            return
        t = ev.time_ns
        turnaround = t - rs.release_time
        ev.payload["turnaround_ns"] = turnaround
        observed = t + self.clock_offsets[rid] - self.ptp_corrections[rid]
        rs.arrivals.append((rid, observed))
        rs.outputs[rid] = ReplicaOutput(rid, rs.frame_id, out, classification, digest, cycles, t, trace)
        self.samples[rid].append(turnaround)
        self.prev_output[rid] = out

    # -- round orchestration --------------------------------------------

    def _run_round(self, frame_id, rep, input_tensor, clean):
        q = self.queue
        rs = _RoundState(frame_id, rep, q.now, input_tensor, clean)
        self._round = rs
        q.schedule(rs.release_time, "input_release", {"frame_id": frame_id, "repetition": rep})
        try:
            barrier = distribute_input(
                frame_id,
                rs.release_time,
                self.healthy_ids,
                self.coupling,
                [self.feed_pairs[rid] for rid in self.healthy_ids],
            )
        except NoHealthyReplicas:
            q.run_all()
            self._finish_round(rs, None, Verdict.degraded("no healthy replicas"),
                               divergence=None, deadline=rs.release_time)
            return
        for rid, t_deliver in barrier.deliveries:
            q.schedule(
                t_deliver,
                "delivery",
                {"frame_id": frame_id, "repetition": rep, "replica_id": rid,
                 "skew_ns": t_deliver - rs.release_time},
                handler=self._on_delivery,
            )
        q.run_all()

        outcome = rendezvous(self.healthy_ids, rs.arrivals, self._window_ns)
        if isinstance(outcome, Complete):
            deadline = outcome.present[-1][1]
        elif rs.arrivals:
            deadline = min(t for _, t in rs.arrivals) + self._window_ns
        else:
            deadline = rs.release_time + self._window_ns

        divergence = None
        if self.topology.bus_trace_compare and isinstance(self.coupling, Tight):
            ids = sorted(rs.outputs)
            if len(ids) >= 2:
                self.bus_comparisons += 1
                ref = rs.outputs[ids[0]]
                for rid in ids[1:]:
                    div = compare_bus_traces(
                        ref.trace, rs.outputs[rid].trace, self.coupling.skew_tolerance_cycles
                    )
                    if div is not None:
                        divergence = (ids[0], rid, div)
                        break

        present_outputs = [rs.outputs[rid] for rid in sorted(rs.outputs)]
        verdict = vote(present_outputs, self.topology.policy, self.topology.comparator, outcome)
        self._finish_round(rs, outcome, verdict, divergence, deadline)

    def _finish_round(self, rs, outcome, verdict, divergence, deadline):
        q = self.queue
        t_record = max(deadline, q.now)
        base = {"frame_id": rs.frame_id, "repetition": rs.repetition}
        if outcome is not None:
            if isinstance(outcome, Complete):
                q.schedule(t_record, "rendezvous",
                           {**base, "outcome": "complete", "skew_ns": outcome.skew_ns})
                self.skews.append(outcome.skew_ns)
            else:
                q.schedule(t_record, "rendezvous",
                           {**base, "outcome": "timeout",
                            "present_ids": list(outcome.present_ids),
                            "missing_ids": list(outcome.missing_ids)})
        if divergence is not None:
            rid_a, rid_b, div = divergence
            q.schedule(t_record, "bus_divergence",
                       {**base, "replica_a": rid_a, "replica_b": rid_b,
                        "event_index": div.event_index, "reason": div.reason})
            self.bus_divergences += 1

        vp = {**base, "variant": verdict.variant}
        if verdict.variant == "pass":
            vp["agreeing_ids"] = list(verdict.agreeing_ids)
            vp["agreed_digest"] = verdict.agreed.digest
        elif verdict.variant == "mismatch":
            vp["groups"] = [list(g) for g in verdict.groups]
        elif verdict.variant == "timeout":
            vp["missing_ids"] = list(verdict.missing_ids)
        else:
            vp["reason"] = verdict.reason
        q.schedule(t_record, "verdict", vp)
        self.verdict_counts[verdict.variant] += 1

        new_state, action = step_safety(self.safety, verdict)
        q.schedule(t_record, "safety_action",
                   {**base, "state": new_state.state, "action": action,
                    "consecutive_faults": new_state.consecutive_fault_count})
        if new_state.state != self.safety.state:
            self.safety_timeline.append(
                {"t_ns": t_record, "frame_id": rs.frame_id, "repetition": rs.repetition,
                 "from": self.safety.state, "to": new_state.state}
            )
        self.safety = new_state
        q.run_all()

        if rs.any_applied:
            self.fault_injected += 1
            if verdict.variant != PASS:
                self.fault_detected += 1
            elif verdict.agreed.digest == rs.clean[3]:
                self.fault_masked_pass += 1
            else:
                self.fault_corrupted_pass += 1

    # -- clock sync ------------------------------------------------------

    def _sync_clocks(self):
        s = self.topology.ptp
        for rid in range(self.topology.replica_count):
            forward = s.link_delay_ns + s.asymmetry_ns
            exchange = simulate_ptp_exchange(
                self.queue.now, self.clock_offsets[rid], forward, s.link_delay_ns,
                s.slave_turnaround_ns,
            )
            est = estimate_ptp_offset(exchange)
            self.ptp_corrections[rid] = est.offset_ns
            info = {"replica_id": rid, "offset_ns": est.offset_ns,
                    "path_delay_ns": est.path_delay_ns}
            self.ptp_info.append(info)
            self.queue.schedule(self.queue.now, "ptp", info)
        self.queue.run_all()

    # -- top level --------------------------------------------------------

    def run(self) -> ExperimentReport:
        wl = self.cfg.workload
        if self.topology.ptp.enabled:
            self._sync_clocks()
        for frame_id in range(wl.frame_count):
            input_tensor = gen_frame(self.cfg.seed, frame_id, wl.input_shape)
            out, cycles, trace = infer(self.weights, input_tensor, self.engine)
            clean = (out, cycles, trace, tensor_digest(out), argmax_index(out))
            for rep in range(wl.repetitions_per_frame):
                self._run_round(frame_id, rep, input_tensor, clean)
        return self._build_report()

    def _build_report(self) -> ExperimentReport:
        replica_stats = {}
        outliers = {}
        histograms = {}
        for rid, xs in self.samples.items():
            replica_stats[rid] = stats(xs) if xs else None
            outliers[rid] = (
                detect_outliers(xs, self.cfg.profiler.outlier_threshold) if len(xs) >= 3 else None
            )
            histograms[rid] = histogram(xs, self.cfg.profiler.bin_count)
        skew = None
        if self.skews:
            skew = {
                "n": len(self.skews),
                "min": min(self.skews),
                "mean": sum(self.skews) / len(self.skews),
                "max": max(self.skews),
            }
        return ExperimentReport(
            config=self.cfg,
            samples=self.samples,
            replica_stats=replica_stats,
            outliers=outliers,
            histograms=histograms,
            verdict_counts=self.verdict_counts,
            safety_final=self.safety.state,
            safety_timeline=self.safety_timeline,
            fault_summary={
                "injected": self.fault_injected,
                "detected": self.fault_detected,
                "masked_pass": self.fault_masked_pass,
                "corrupted_pass": self.fault_corrupted_pass,
            },
            skew=skew,
            bus={"comparisons": self.bus_comparisons, "divergences": self.bus_divergences},
            ptp=self.ptp_info,
        )


def run_experiment(config: ExperimentConfig, trace_writer=None) -> ExperimentReport:
    """Run one experiment; optionally stream trace records to a callable."""
    return ExperimentRunner(config, trace_writer).run()


def run_to_directory(config: ExperimentConfig, out_dir) -> ExperimentReport:
    """Run one experiment and write trace.jsonl, report.json and one
    histogram CSV per replica into `out_dir`."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / TRACE_FILENAME, "w") as tf:
        writer = lambda rec: tf.write(json.dumps(rec, separators=(",", ":")) + "\n")
        report = ExperimentRunner(config, writer).run()
    with open(out / REPORT_FILENAME, "w") as rf:
        json.dump(report.to_json_dict(), rf, indent=2)
        rf.write("\n")
    for rid, bins in report.histograms.items():
        with open(out / f"hist_replica{rid}.csv", "w") as hf:
            write_histogram_csv(bins, hf)
    return report


def _as_report_dict(report) -> dict:
    return report.to_json_dict() if hasattr(report, "to_json_dict") else report


def compare_runs(report_a, report_b, alpha: float = 0.01) -> dict:
    """Kolmogorov-Smirnov comparison of two runs, per replica pairing.

    Refuses (ConfigError) when a paired replica has fewer than 4 samples
    on either side.
    """
    da, db = _as_report_dict(report_a), _as_report_dict(report_b)
    reps_a = {r["replica_id"]: r for r in da.get("replicas", [])}
    reps_b = {r["replica_id"]: r for r in db.get("replicas", [])}
    common = sorted(set(reps_a) & set(reps_b))
    pairs = [rid for rid in common if reps_a[rid]["samples"] or reps_b[rid]["samples"]]
    if not pairs:
        raise ConfigError(["comparison refused: no replica with latency samples in both runs"])
    rows = []
    for rid in pairs:
        xa = reps_a[rid]["samples"]
        xb = reps_b[rid]["samples"]
        if len(xa) < 4 or len(xb) < 4:
            raise ConfigError([
                f"comparison refused: replica {rid} has {len(xa)} vs {len(xb)} samples; "
                "need at least 4 on each side"
            ])
        ks = ks_statistic(xa, xb, alpha)
        rows.append(
            {
                "replica_id": rid,
                "ks": ks.to_json_dict(),
                "a": _stats_summary(reps_a[rid]),
                "b": _stats_summary(reps_b[rid]),
            }
        )
    return {
        "alpha": alpha,
        "replicas": rows,
        "any_distinguishable": any(r["ks"]["distinguishable"] for r in rows),
    }


def _stats_summary(rep_entry) -> dict:
    st = rep_entry.get("stats") or {}
    out = rep_entry.get("outliers") or {}
    return {
        "n": st.get("n", 0),
        "mean": st.get("mean"),
        "p99": st.get("p99"),
        "excess_kurtosis": st.get("excess_kurtosis"),
        "outlier_count": len(out.get("indices", [])),
    }


def render_comparison_table(comparison: dict) -> str:
    """Side-by-side text table for a compare_runs result."""
    header = (
        f"{'replica':>7} {'D':>10} {'critical':>10} {'distinct':>8} "
        f"{'mean_a':>12} {'mean_b':>12} {'p99_a':>10} {'p99_b':>10} "
        f"{'kurt_a':>10} {'kurt_b':>10} {'outl_a':>6} {'outl_b':>6}"
    )
    lines = [header, "-" * len(header)]
    for row in comparison["replicas"]:
        ks = row["ks"]
        a, b = row["a"], row["b"]

        def fmt(v, spec):
            return format(v, spec) if isinstance(v, (int, float)) else "-"

        lines.append(
            f"{row['replica_id']:>7} {ks['d']:>10.6f} {ks['critical_value']:>10.6f} "
            f"{str(ks['distinguishable']):>8} "
            f"{fmt(a['mean'], '12.1f')} {fmt(b['mean'], '12.1f')} "
            f"{fmt(a['p99'], '10')} {fmt(b['p99'], '10')} "
            f"{fmt(a['excess_kurtosis'], '10.3f')} {fmt(b['excess_kurtosis'], '10.3f')} "
            f"{a['outlier_count']:>6} {b['outlier_count']:>6}"
        )
    return "\n".join(lines)
