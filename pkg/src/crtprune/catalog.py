"""Catalog of mechanisms and markings exercised by the verification suites."""

from __future__ import annotations

from .mechanism import (
    BranchingMechanism, ConstantMarks, FiniteAtoms, MarkingSpec, StableTail,
    Tabulated, ThresholdMarks, TabulatedMarks, ZeroMeasure, marked_mass_mean,
    IntegrabilityError,
)

MECHANISMS = {
    "quadratic": BranchingMechanism(0.0, 1.0, ZeroMeasure()),
    "quadratic_drift": BranchingMechanism(0.5, 1.0, ZeroMeasure()),
    "atom_unit": BranchingMechanism(0.0, 1.0, FiniteAtoms(((1.0, 1.0),))),
    "atoms_mixed": BranchingMechanism(0.3, 0.5, FiniteAtoms(((0.5, 2.0), (2.0, 0.7)))),
    "atom_finite_var": BranchingMechanism(0.0, 0.0, FiniteAtoms(((1.0, 1.0),))),
    "stable_1p5": BranchingMechanism(0.0, 0.0, StableTail(1.5)),
    "stable_drifted": BranchingMechanism(0.2, 0.1, StableTail(1.2)),
    "tabulated": BranchingMechanism(0.1, 0.4, Tabulated(
        sizes=(0.05, 0.2, 1.0, 4.0), densities=(8.0, 1.2, 0.15, 0.004),
        tail_exponent=2.8)),
}

MARKINGS = {
    "none": MarkingSpec(p=ConstantMarks(0.0), alpha1=0.0),
    "skeleton": MarkingSpec(p=ConstantMarks(0.0), alpha1=1.0),
    "nodes_all": MarkingSpec(p=ConstantMarks(1.0), alpha1=0.0),
    "nodes_half": MarkingSpec(p=ConstantMarks(0.4), alpha1=0.5),
    "nodes_large": MarkingSpec(p=ThresholdMarks(1.0), alpha1=0.0),
    "nodes_ramp": MarkingSpec(p=TabulatedMarks((0.1, 1.0, 3.0), (0.0, 0.3, 0.9)), alpha1=0.25),
}


def valid_pairs():
    """(name, mechanism, marking) for every pair satisfying the mark integrability condition."""
    out = []
    for mname, mech in MECHANISMS.items():
        for kname, marking in MARKINGS.items():
            try:
                marked_mass_mean(mech.levy, marking.p)
            except IntegrabilityError:
                continue
            out.append((f"{mname}/{kname}", mech, marking))
    return out
