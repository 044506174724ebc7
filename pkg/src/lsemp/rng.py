"""Counter-based random streams keyed by (seed, domain, replicate, tag).

Every unit of Monte Carlo work draws from its own Philox stream, so results do
not depend on the order in which replicates are evaluated.
"""

import numpy as np

# Stream domains. Pilot and replicate work never share a domain.
REPLICATE = 0
PILOT = 1
BOOTSTRAP = 2
LIMIT = 3
LONGRUN = 4

DOMAIN_NAMES = {
    REPLICATE: "replicate",
    PILOT: "pilot",
    BOOTSTRAP: "bootstrap",
    LIMIT: "limit",
    LONGRUN: "longrun",
}

# Per-replicate tags.
FORWARD = 0
PAST = 1
COUPLE = 2


def stream(seed, *key):
    """Return a Philox generator for the stream ``(seed, *key)``."""
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def sub_seed(seed, *key):
    """Derive a fresh integer seed for a nested computation."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(2, dtype=np.uint64)[0] >> np.uint64(1))
