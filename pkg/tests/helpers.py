"""Small constructors shared across test modules."""

from lockstepsim.fixedpoint import FixedPointTensor, tensor_digest
from lockstepsim.replica import ReplicaOutput


def make_output(replica_id, values, frame_id=0, completion_time=0, cycles=0):
    if isinstance(values, int):
        values = [values]
    tensor = FixedPointTensor((len(values),), tuple(values))
    return ReplicaOutput(
        replica_id=replica_id,
        frame_id=frame_id,
        output=tensor,
        classification=tensor.data.index(max(tensor.data)),
        digest=tensor_digest(tensor),
        compute_cycles=cycles,
        completion_time=completion_time,
        trace=(),
    )


def zero_jitter_duplex(seed=1, frames=5, reps=1, window_ns=10_000_000, policy="1oo2",
                       replicas=2, faults=(), debounce=1, extra_topology=None,
                       arch=(4, 4, 3), input_shape=(4,)):
    """Config dict for a quiet (zero-jitter) loose topology."""
    topology = {
        "replicas": replicas,
        "coupling": {"mode": "loose", "rendezvous_window_ns": window_ns},
        "voter": {
            "policy": policy,
            "comparator": {"kind": "exact"},
            "debounce_threshold": debounce,
        },
        "clock": {"freq_hz": 1_000_000_000, "drift_ppm": 0},
    }
    if extra_topology:
        topology.update(extra_topology)
    return {
        "seed": seed,
        "topology": topology,
        "workload": {
            "frame_count": frames,
            "repetitions_per_frame": reps,
            "input_shape": list(input_shape),
            "arch": list(arch),
        },
        "faults": list(faults),
    }
