#!/usr/bin/env python3
"""
PyTest configuration and fixtures for feedwatch tests
"""

import os
import shutil
import sys
import tempfile
from pathlib import Path

import numpy as np
import pytest

# Add src directory to Python path for imports
sys.path.insert(0, os.path.join(os.path.dirname(__file__), '..', 'src'))

from session_log import MS_PER_MINUTE, ActionKind, ActionRecord, RoleLabel, Session, Target, TargetClass
from svm_core import Hyperparams, KernelSpec, train_ssvm
from synthgen import GeneratorConfig, generate_corpus

BASE_MS = 1_000_000.0


def rec(minute, action, person=None, target_class=None):
    """ActionRecord at ``minute`` minutes after BASE_MS."""
    kind = ActionKind.from_name(action)
    target = Target(person, TargetClass(target_class)) if person else None
    return ActionRecord(BASE_MS + minute * MS_PER_MINUTE, kind, target)


@pytest.fixture
def temp_dir():
    """Create a temporary directory for test data"""
    temp_path = Path(tempfile.mkdtemp())
    yield temp_path
    # Cleanup after test
    shutil.rmtree(temp_path, ignore_errors=True)


@pytest.fixture
def golden_session():
    """Hand-built 10-record session spanning every page kind but public."""
    records = (
        rec(0.0, "View_Cards", "amy", "friend"),
        rec(0.5, "Likes", "amy", "friend"),
        rec(1.0, "To_Wall_Page", "amy", "friend"),
        rec(1.5, "Expand_Page"),
        rec(2.0, "To_Feed_Page"),
        rec(2.5, "To_Photo_Page", "me", "self"),
        rec(3.0, "Expand_Comments", "zed", "nonfriend"),
        rec(3.5, "To_Friend_List_Page", "amy", "friend"),
        rec(4.0, "To_Message_Page"),
        rec(4.5, "View_Messages", "bob", "friend"),
    )
    return Session("golden", records, label=RoleLabel.OWNER)


@pytest.fixture
def separable_data():
    """Two well separated Gaussian blobs, 20 points each."""
    rng = np.random.default_rng(3)
    X = np.vstack([rng.normal(-2.0, 0.5, size=(20, 2)), rng.normal(2.0, 0.5, size=(20, 2))])
    y = np.array([-1] * 20 + [1] * 20)
    return X, y


@pytest.fixture
def imbalanced_data():
    """Noisy blobs with 30 positives and 18 negatives over 4 features."""
    rng = np.random.default_rng(11)
    pos = rng.normal(0.8, 1.0, size=(30, 4))
    neg = rng.normal(-0.8, 1.0, size=(18, 4))
    X = np.vstack([pos, neg])
    y = np.array([1] * 30 + [-1] * 18)
    return X, y


@pytest.fixture
def toy_model(separable_data):
    X, y = separable_data
    return train_ssvm(X, y, Hyperparams(C=10.0, gamma=0.5), kernel=KernelSpec.rbf(0.5))


@pytest.fixture(scope="session")
def small_corpus():
    """A 24-session synthetic corpus (8 per role), 12-minute sessions."""
    config = GeneratorConfig(counts={RoleLabel.OWNER: 8, RoleLabel.ACQUAINTANCE: 8, RoleLabel.STRANGER: 8},
                             session_minutes=12.0, seed=5)
    sessions, labels = generate_corpus(config)
    return sessions, labels


@pytest.fixture(scope="session")
def default_corpus():
    """The default 278-session corpus (100 owner, 81 acquaintance, 97 stranger), seed 0."""
    return generate_corpus(GeneratorConfig(seed=0))
