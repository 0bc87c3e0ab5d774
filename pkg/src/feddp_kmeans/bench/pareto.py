"""Pareto fronts over (eps_total, cost), both minimized."""

from __future__ import annotations

from typing import Sequence


def dominates(a, b) -> bool:
    """``a`` is no worse than ``b`` in both coordinates and strictly better in one."""
    return (a.eps_total <= b.eps_total and a.cost <= b.cost
            and (a.eps_total < b.eps_total or a.cost < b.cost))


def pareto_front(records: Sequence) -> list:
    """Non-dominated records, sorted by eps_total then cost (input order breaks ties)."""
    if not records:
        raise ValueError("pareto front of an empty record list")
    ordered = sorted(enumerate(records), key=lambda ir: (ir[1].eps_total, ir[1].cost, ir[0]))
    front = []
    best_cost = float("inf")
    for _, rec in ordered:
        if rec.cost < best_cost:
            front.append(rec)
            best_cost = rec.cost
        elif front and rec.cost == front[-1].cost and rec.eps_total == front[-1].eps_total:
            front.append(rec)  # exact duplicate point: neither dominates the other
    return front
