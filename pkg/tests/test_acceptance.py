"""Acceptance gate: one test per criterion, printing one pass/fail line each."""
import pytest

from sepcon import acceptance


def _check(fn):
    result = fn()
    print(result.line())
    assert result.passed, result.line()


def test_criterion_1_diagonal_exactness():
    _check(acceptance.criterion_1_diagonal_exactness)


def test_criterion_2_section_continuity():
    _check(acceptance.criterion_2_section_continuity)


def test_criterion_3_joint_negative_control():
    _check(acceptance.criterion_3_joint_negative_control)


def test_criterion_4_prop1_exactness():
    _check(acceptance.criterion_4_prop1_exactness)


def test_criterion_5_theorem2_pipeline():
    _check(acceptance.criterion_5_theorem2_pipeline)


def test_criterion_6_theorem4_gatekeeping():
    _check(acceptance.criterion_6_theorem4_gatekeeping)


def test_criterion_7_theorem5_gluing():
    _check(acceptance.criterion_7_theorem5_gluing)


def test_criterion_8_roundtrip():
    _check(acceptance.criterion_8_roundtrip)


def test_criterion_9_determinism():
    _check(acceptance.criterion_9_determinism)
