import numpy as np

from cascade_screen import questionnaire as q

ACE_NAMES = q.CANONICAL_ACE_ITEMS + q.DEFAULT_EXTRA_ACE_ITEMS


def make_record(rid="r1", ace=0, who5=0, mdi=0, gad7=0, isi=0, behavioral=0, label=0, **ace_overrides):
    """A record with every item of an instrument set to one value; ACE items may be overridden."""
    ace_items = {name: ace for name in ACE_NAMES}
    ace_items.update(ace_overrides)
    return q.ParticipantRecord(
        id=rid,
        ace_items=ace_items,
        who5_items=(who5,) * 5,
        mdi_items=(mdi,) * 12,
        gad7_items=(gad7,) * 7,
        isi_items=(isi,) * 7,
        behavioral={name: behavioral for name in q.BEHAVIORAL_ITEMS},
        label=label,
    )


def random_record(rng, rid="r", label=None):
    return q.ParticipantRecord(
        id=rid,
        ace_items={name: int(rng.integers(0, 2)) for name in ACE_NAMES},
        who5_items=tuple(int(v) for v in rng.integers(0, 6, 5)),
        mdi_items=tuple(int(v) for v in rng.integers(0, 6, 12)),
        gad7_items=tuple(int(v) for v in rng.integers(0, 4, 7)),
        isi_items=tuple(int(v) for v in rng.integers(0, 5, 7)),
        behavioral={name: int(rng.integers(0, 2)) for name in q.BEHAVIORAL_ITEMS},
        label=int(rng.integers(0, 2)) if label is None else label,
    )


def blobs(rng, n=60, d=3, shift=2.0):
    """Two Gaussian blobs with balanced labels."""
    y = np.arange(n) % 2
    X = rng.normal(size=(n, d)) + shift * y[:, None]
    return X, y


# Acceptance results, printed by the terminal-summary hook in conftest.
ACCEPTANCE = {}
