#!/usr/bin/env python3
"""
Synthetic session generator for feedwatch
Creates labeled owner / acquaintance / stranger sessions from role profiles
"""

import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from faker import Faker

from seeding import derive_rng, derive_seed
from session_log import (
    ACTION_KINDS,
    MS_PER_MINUTE,
    TARGET_CLASSES,
    ActionKind,
    ActionRecord,
    RoleLabel,
    Session,
    Target,
    TargetClass,
)

logger = logging.getLogger(__name__)

DEFAULT_PROFILES = Path(__file__).resolve().parent.parent / "config" / "role_profiles.json"
PROFILE_SCHEMA_VERSION = 1
DEFAULT_COUNTS = {RoleLabel.OWNER: 100, RoleLabel.ACQUAINTANCE: 81, RoleLabel.STRANGER: 97}
EPOCH_BASE_MS = 1345837539249.47
ACTION_RATE_BRACKET = (1.5, 4.5)
SWITCH_RATE_BRACKET = (0.3, 1.1)


@dataclass
class RoleProfile:
    rates: dict
    targets: dict
    friends: int = 60
    nonfriends: int = 80
    focus: float = 1.0
    blend_toward: tuple = ()
    blend_beta: Optional[tuple] = None

    def __post_init__(self):
        for kind, rate in self.rates.items():
            if rate < 0:
                raise ValueError(f"negative rate for {kind.value}")
        for kind, mix in self.targets.items():
            if len(mix) != 3 or min(mix) < 0 or abs(sum(mix) - 1.0) > 1e-9:
                raise ValueError(f"target mix for {kind} must be 3 probabilities summing to 1")
        if self.friends < 1 or self.nonfriends < 1:
            raise ValueError("person pools must be non-empty")
        if self.blend_beta is not None and (len(self.blend_beta) != 2 or min(self.blend_beta) <= 0):
            raise ValueError("blend beta needs two positive shape parameters")

    def rate(self, kind):
        return self.rates.get(kind, 0.0)

    def target_mix(self, kind):
        return self.targets.get(kind, self.targets.get("default", (1 / 3, 1 / 3, 1 / 3)))

    @property
    def action_rate(self):
        return sum(self.rates.values())

    @property
    def switch_rate(self):
        return sum(r for k, r in self.rates.items() if k.page_switching)

    def check_calibration(self):
        """Aggregate rates must bracket the observed 3.0 actions/min and 0.7 switches/min."""
        lo, hi = ACTION_RATE_BRACKET
        if not lo <= self.action_rate <= hi:
            raise ValueError(f"action rate {self.action_rate:.3f}/min outside [{lo}, {hi}]")
        lo, hi = SWITCH_RATE_BRACKET
        if not lo <= self.switch_rate <= hi:
            raise ValueError(f"page-switch rate {self.switch_rate:.3f}/min outside [{lo}, {hi}]")

    def mixed_with(self, other, weight):
        """Rates, target mixes and focus moved ``weight`` of the way toward ``other``."""
        rates = {kind: (1.0 - weight) * self.rate(kind) + weight * other.rate(kind)
                 for kind in set(self.rates) | set(other.rates)}
        targets = {key: tuple((1.0 - weight) * p + weight * q
                              for p, q in zip(self.target_mix(key), other.target_mix(key)))
                   for key in set(self.targets) | set(other.targets)}
        return RoleProfile(rates=rates, targets=targets, friends=self.friends, nonfriends=self.nonfriends,
                           focus=(1.0 - weight) * self.focus + weight * other.focus)


def _profile_from_dict(doc):
    rates = {ActionKind.from_name(name): float(rate) for name, rate in doc.get("rates", {}).items()}
    targets = {}
    for name, mix in doc.get("targets", {}).items():
        key = name if name == "default" else ActionKind.from_name(name)
        targets[key] = tuple(float(p) for p in mix)
    pools = doc.get("pools", {})
    blend = doc.get("blend") or {}
    beta = blend.get("beta")
    return RoleProfile(rates=rates, targets=targets, friends=int(pools.get("friends", 60)),
                       nonfriends=int(pools.get("nonfriends", 80)), focus=float(doc.get("focus", 1.0)),
                       blend_toward=tuple(RoleLabel.from_name(r) for r in blend.get("toward", ())),
                       blend_beta=tuple(float(b) for b in beta) if beta else None)


def load_profiles(path=None):
    """Read a role-profile file into {RoleLabel: RoleProfile}."""
    path = Path(path) if path else DEFAULT_PROFILES
    if not path.exists():
        raise FileNotFoundError(f"Role profiles not found at {path}")
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("schema_version") != PROFILE_SCHEMA_VERSION:
        raise ValueError(f"unsupported profile schema {doc.get('schema_version')}")
    profiles = {RoleLabel.from_name(role): _profile_from_dict(body) for role, body in doc["roles"].items()}
    for role, profile in profiles.items():
        try:
            profile.check_calibration()
        except ValueError as e:
            raise ValueError(f"{path}: {role.value} profile: {e}") from None
    return profiles


@dataclass
class GeneratorConfig:
    counts: dict = field(default_factory=lambda: dict(DEFAULT_COUNTS))
    session_minutes: float = 30.0
    seed: int = 0
    profiles: Optional[dict] = None
    noisy_fraction: float = 0.0
    max_gap_minutes: float = 4.0

    def __post_init__(self):
        if any(c < 0 for c in self.counts.values()):
            raise ValueError("role counts must be non-negative")
        if not self.session_minutes > 0:
            raise ValueError("session length must be positive")
        if self.profiles is None:
            self.profiles = load_profiles()


class SessionGenerator:
    """Draws Poisson action streams per role and assembles them into sessions."""

    def __init__(self, config=None):
        self.config = config or GeneratorConfig()
        self.fake = Faker()

    def _people(self, role, index, profile):
        self.fake.seed_instance(derive_seed(self.config.seed, "people", role.value, index))

        def handle(prefix, k):
            return f"{prefix}-{self.fake.first_name().lower()}.{self.fake.last_name().lower()}-{k:03d}"

        owner = handle("owner", 0)
        friends = [handle("friend", k) for k in range(profile.friends)]
        nonfriends = [handle("nonfriend", k) for k in range(profile.nonfriends)]
        return owner, friends, nonfriends

    @staticmethod
    def _focus_weights(size, focus):
        weights = 1.0 / np.arange(1, size + 1) ** focus
        return weights / weights.sum()

    def _draw_events(self, rng, profile, owner, friends, nonfriends):
        minutes = self.config.session_minutes
        friend_w = self._focus_weights(len(friends), profile.focus)
        nonfriend_w = self._focus_weights(len(nonfriends), profile.focus)
        events = []
        for kind in ACTION_KINDS:
            rate = profile.rate(kind)
            if rate <= 0:
                continue
            count = rng.poisson(rate * minutes)
            times = rng.uniform(0.0, minutes, count)
            if not kind.interactive:
                events += [(t, kind, None) for t in times]
                continue
            classes = rng.choice(3, size=count, p=profile.target_mix(kind))
            for t, c in zip(times, classes):
                target_class = TARGET_CLASSES[c]
                if target_class is TargetClass.SELF_OWNER:
                    person = owner
                elif target_class is TargetClass.FRIEND:
                    person = friends[rng.choice(len(friends), p=friend_w)]
                else:
                    person = nonfriends[rng.choice(len(nonfriends), p=nonfriend_w)]
                events.append((t, kind, Target(person, target_class)))
        events.sort(key=lambda e: e[0])
        return events

    def _fill_gaps(self, events):
        """Insert page expansions so no idle gap exceeds max_gap_minutes."""
        limit = self.config.max_gap_minutes
        filled = True
        while filled and len(events) > 1:
            filled = False
            out = [events[0]]
            for event in events[1:]:
                gap = event[0] - out[-1][0]
                if gap > limit:
                    out.append((out[-1][0] + gap / 2.0, ActionKind.EXPAND_PAGE, None))
                    filled = True
                out.append(event)
            events = out
        return events

    def _inject_noise(self, role, index, events):
        rng = derive_rng(self.config.seed, "noise", role.value, index)
        if len(events) < 2 or rng.random() >= self.config.noisy_fraction:
            return events
        split = int(rng.integers(1, len(events)))
        shift = 6.0 + rng.uniform(0.0, 3.0)
        return events[:split] + [(t + shift, k, tg) for t, k, tg in events[split:]]

    def session_profile(self, role, index=0):
        """The role's profile blended toward one of its ``blend_toward`` roles.

        The blend weight is a per-session Beta draw, so most sessions stay close
        to their role and a few drift far enough to look like another one.
        """
        profile = self.config.profiles[role]
        toward = [r for r in profile.blend_toward if r in self.config.profiles]
        if profile.blend_beta is None or not toward:
            return profile
        rng = derive_rng(self.config.seed, "blend", role.value, index)
        other = toward[int(rng.integers(len(toward)))]
        return profile.mixed_with(self.config.profiles[other], float(rng.beta(*profile.blend_beta)))

    def generate_session(self, role, index=0):
        profile = self.session_profile(role, index)
        rng = derive_rng(self.config.seed, "synth", role.value, index)
        owner, friends, nonfriends = self._people(role, index, profile)
        events = self._draw_events(rng, profile, owner, friends, nonfriends)
        events = self._fill_gaps(events)
        events = self._inject_noise(role, index, events)
        base = EPOCH_BASE_MS + float(rng.uniform(0.0, 30 * 86400000.0))
        records = tuple(ActionRecord(base + t * MS_PER_MINUTE, kind, target)
                        for t, kind, target in events)
        return Session(f"{role.value}-{index:04d}", records, label=role)

    def generate_corpus(self):
        sessions = []
        for role in RoleLabel:
            for index in range(self.config.counts.get(role, 0)):
                sessions.append(self.generate_session(role, index))
        labels = {s.session_id: s.label for s in sessions}
        logger.info("Generated %d synthetic sessions (seed %d)", len(sessions), self.config.seed)
        return sessions, labels


def generate_session(role, config=None, index=0):
    return SessionGenerator(config).generate_session(role, index)


def generate_corpus(config=None):
    return SessionGenerator(config).generate_corpus()
