"""The 11-action benchmark fixture used throughout the experiments.

Six actions need nothing beyond the base runtime; five declare extra
libraries.  The library sets are deliberate approximations built to encode the
relationships the experiments rely on: the video and image actions share an
imaging library, the learning and image actions share a model library, and the
markdown/log-mining pair pin old versions of overlapping libraries so they
conflict with almost everyone (and with each other).

Per-action dynamics (mean execution seconds, mean cold-start seconds) span the
short-I/O to heavy-compute range so cold starts dominate some actions'
end-to-end latency and barely matter for others.
"""

from .lifecycle import ActionSpec
from .queueing import QosSpec
from .repack import LibraryManifest, ingest_manifests

#: action name -> declared extra libraries (empty = base runtime only)
FIXTURE_LIBRARIES = {
    "dd": {},
    "fop": {},
    "lp": {},
    "mm": {},
    "cdb": {},
    "clou": {},
    "vid": {"numpy": "1.16", "pillow": "8.0", "requests": "2.4"},
    "img": {"pillow": "8.0", "scikit-learn": "0.24", "markupsafe": "1.1"},
    "kms": {"numpy": "1.16", "scikit-learn": "0.24"},
    "md": {"requests": "2.4", "markdown": "3.1"},
    "mr": {"markupsafe": "0.23", "markdown": "2.6", "mrjob": "0.6"},
}

#: action name -> (mean execution seconds, mean cold-start seconds)
FIXTURE_DYNAMICS = {
    "dd": (0.066, 1.00),
    "fop": (0.15, 1.10),
    "lp": (0.12, 1.00),
    "mm": (0.18, 1.05),
    "cdb": (1.05, 0.98),
    "clou": (0.40, 1.20),
    "vid": (0.90, 2.20),
    "img": (0.30, 1.60),
    "kms": (0.55, 1.90),
    "md": (0.08, 0.90),
    "mr": (0.60, 1.30),
}

#: latency target as a multiple of the mean execution time
QOS_TARGET_FACTOR = 4.0

#: required fraction of queries inside the latency target
QOS_REQUIRED = 0.95


def fixture_manifests(empty=False):
    """Registry of the 11 manifests; ``empty`` strips every library list."""
    records = []
    for name, libs in FIXTURE_LIBRARIES.items():
        records.append(LibraryManifest(name, {} if empty else libs))
    return ingest_manifests(records)


def fixture_actions(empty=False, exec_dist="exponential", cold_dist="fixed"):
    """The fixture as full action specs, keyed by name."""
    manifests = fixture_manifests(empty=empty)
    actions = {}
    for name, manifest in manifests.items():
        exec_mean, cold_mean = FIXTURE_DYNAMICS[name]
        qos = QosSpec(QOS_TARGET_FACTOR * exec_mean, QOS_REQUIRED)
        actions[name] = ActionSpec(name, manifest, qos, exec_mean, cold_mean,
                                   exec_dist=exec_dist, cold_dist=cold_dist)
    return actions


def library_actions():
    """Names of the five actions that declare extra libraries."""
    return [n for n, libs in FIXTURE_LIBRARIES.items() if libs]


def no_library_actions():
    """Names of the six actions with no extra libraries."""
    return [n for n, libs in FIXTURE_LIBRARIES.items() if not libs]
