"""Canonical note categories and a reference corpus mix.

The category list is fixed: feature blocks, pooling weights, and reports all
index categories by position in CANONICAL_CATEGORIES. The reference mix
(share of notes per category, mean tokens per note) approximates what a large
critical-care corpus looks like and seeds the synthetic generator defaults.
"""

from __future__ import annotations

CANONICAL_CATEGORIES: tuple[str, ...] = (
    "Nursing/other",
    "Radiology",
    "Nursing",
    "Physician",
    "ECG",
    "Discharge summary",
    "Respiratory",
    "Echo",
    "Nutrition",
    "General",
    "Rehab Services",
    "Social Work",
    "Case Management",
    "Pharmacy",
    "Consult",
)

N_CATEGORIES = len(CANONICAL_CATEGORIES)

CATEGORY_INDEX: dict[str, int] = {c: i for i, c in enumerate(CANONICAL_CATEGORIES)}

# (share of all notes, mean tokens per note), aligned to CANONICAL_CATEGORIES.
REFERENCE_NOTE_PROPORTIONS: tuple[float, ...] = (
    0.324526,
    0.222811,
    0.159828,
    0.107466,
    0.092769,
    0.029763,
    0.023811,
    0.020052,
    0.007219,
    0.005984,
    0.003243,
    0.001376,
    0.000962,
    0.000109,
    0.000080,
)

REFERENCE_MEAN_TOKENS: tuple[float, ...] = (
    153.2393,
    185.6273,
    264.2057,
    751.9017,
    30.2879,
    1623.0770,
    145.7208,
    320.1120,
    268.7352,
    204.1432,
    403.7506,
    306.4766,
    144.0084,
    229.4815,
    880.5000,
)

_BY_FOLDED = {c.strip().lower(): c for c in CANONICAL_CATEGORIES}


def canonical_category(raw: str) -> str | None:
    """Map a raw CATEGORY cell to its canonical name, or None if unknown.

    Matching ignores case and surrounding whitespace; anything else is
    treated as a distinct, unrecognized category.
    """
    return _BY_FOLDED.get(raw.strip().lower())
