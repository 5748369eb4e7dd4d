"""Synthetic multi-view exam dataset with simulated expert raters.

Participants are assigned skill levels on a fixed grid; per view, each
checklist criterion is met with probability close to the skill. Frames are
fan-shaped grayscale renders whose content degrades with unmet criteria,
and three noisy raters re-grade every video. Labels shared by all frames
of a video are the mean rater scores, exactly as the exam protocol demands.

All randomness is drawn from named streams derived from the master seed
(see ``seeding``), so generation is reproducible for any thread count.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ConfigError, DataError
from .seeding import derive_rng, derive_seed
from .views import DEFAULT_VIEWS, VISIBLE, CENTERED, DEPTH, ROTATION, ViewSpec

Array = np.ndarray

PULSE_AMPLITUDE = 0.08
SPECKLE_SIGMA = 0.05
BACKGROUND = 0.12
ROTATION_OFFSET = 0.30  # radians, applied about the fan apex when unmet
CENTER_OFFSET = 0.10  # horizontal shift in unit coords when unmet
DEPTH_OFFSET = 0.09  # vertical shift in unit coords when unmet
APEX = (0.5, 0.06)
FAN_RADIUS = 0.92
FAN_INNER = 0.04

DEFAULT_TRAIN_FRACTION = 32 / 38


@dataclass(frozen=True)
class GenConfig:
    participants: int = 38
    frames: int = 8
    image_hw: tuple[int, int] = (64, 64)
    flip_noise: float = 0.07  # per-criterion rater flip probability
    gi_noise: float = 0.35  # rater impression noise (std, score units)
    missing_prob: float = 0.0  # probability a video fails to store
    seed: int = 0

    def __post_init__(self):
        if self.participants < 1:
            raise ConfigError(f"participants must be >= 1, got {self.participants}")
        if self.frames < 1:
            raise ConfigError(f"frames must be >= 1, got {self.frames}")
        if min(self.image_hw) < 8:
            raise ConfigError(f"image size too small: {self.image_hw}")
        for name in ("flip_noise", "missing_prob"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if self.gi_noise < 0:
            raise ConfigError(f"gi_noise must be >= 0, got {self.gi_noise}")


@dataclass
class ExamRecord:
    """One stored video: identity, frame files, rater grades, mean labels."""

    participant_id: int
    view_id: int
    video_id: str
    frame_paths: list[str]
    rater_criteria: list[list[int]]  # 3 x K bit arrays
    rater_gi: list[int]  # 3 integers in 0..4
    mean_cp: float
    mean_gi: float
    true_criteria: list[int] = field(default_factory=list)  # not serialised

    def to_json(self) -> str:
        return json.dumps(
            {
                "participant_id": self.participant_id,
                "view_id": self.view_id,
                "video_id": self.video_id,
                "frame_paths": self.frame_paths,
                "rater_criteria": self.rater_criteria,
                "rater_gi": self.rater_gi,
                "mean_cp": self.mean_cp,
                "mean_gi": self.mean_gi,
            },
            separators=(", ", ": "),
        )

    @classmethod
    def from_json(cls, line: str) -> "ExamRecord":
        d = json.loads(line)
        return cls(
            participant_id=d["participant_id"],
            view_id=d["view_id"],
            video_id=d["video_id"],
            frame_paths=d["frame_paths"],
            rater_criteria=d["rater_criteria"],
            rater_gi=d["rater_gi"],
            mean_cp=d["mean_cp"],
            mean_gi=d["mean_gi"],
        )


def checklist_score(criteria_met) -> float:
    """Percentage of checklist criteria met, 0..100."""
    bits = np.asarray(criteria_met)
    return 100.0 * float(bits.sum()) / bits.size


def participant_skills(n: int) -> Array:
    """Deterministic skill grid so split difficulty is stable across seeds."""
    return np.linspace(0.2, 0.95, n)


def render_frame(
    view: ViewSpec,
    criteria_met,
    phase: float,
    seed: int,
    image_hw: tuple[int, int] = (64, 64),
) -> Array:
    """Render one grayscale frame in [0, 1].

    Unmet structure-visible criteria omit their structure; unmet rotation,
    centering, or depth criteria each displace the whole layout by a fixed
    offset (offsets accumulate). Structure radii pulse with the cardiac
    phase and seeded speckle noise is added inside the fan.
    """
    bits = np.asarray(criteria_met).astype(bool)
    if bits.size != view.n_criteria:
        raise DataError(
            f"view {view.view_id} expects {view.n_criteria} criteria, got {bits.size}"
        )
    h, w = image_hw
    ys, xs = np.mgrid[0:h, 0:w]
    # normalise to the unit square; +0.5 samples pixel centres
    ux = (xs + 0.5) / w
    uy = (ys + 0.5) / h
    ax, ay = APEX
    dx = ux - ax
    dy = uy - ay
    radius = np.hypot(dx, dy)
    angle = np.arctan2(dx, dy)  # 0 points straight down the fan
    half = math.radians(view.opening_deg) / 2.0
    sector = (np.abs(angle) <= half) & (radius <= FAN_RADIUS) & (radius >= FAN_INNER)

    rot = 0.0
    shift_x = 0.0
    shift_y = 0.0
    hidden = set()
    for crit, met in zip(view.checklist, bits):
        if met:
            continue
        if crit.kind == VISIBLE:
            hidden.add(crit.structure)
        elif crit.kind == ROTATION:
            rot += ROTATION_OFFSET
        elif crit.kind == CENTERED:
            shift_x += CENTER_OFFSET
        elif crit.kind == DEPTH:
            shift_y += DEPTH_OFFSET

    pulse = 1.0 + PULSE_AMPLITUDE * math.sin(2.0 * math.pi * phase)
    img = np.where(sector, BACKGROUND, 0.0)
    cos_r, sin_r = math.cos(rot), math.sin(rot)
    for i, s in enumerate(view.structures):
        if i in hidden:
            continue
        cx, cy = s.center
        vx, vy = cx - ax, cy - ay
        cx = ax + cos_r * vx - sin_r * vy + shift_x
        cy = ay + sin_r * vx + cos_r * vy + shift_y
        rx = s.radii[0] * pulse
        ry = s.radii[1] * pulse
        q = ((ux - cx) / rx) ** 2 + ((uy - cy) / ry) ** 2
        if s.kind == "ellipse":
            mask = q <= 1.0
        else:  # arc: elliptical ring band
            inner = (1.0 - s.thickness) ** 2
            mask = (q <= 1.0) & (q >= inner)
        img[mask & sector] = s.intensity

    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, SPECKLE_SIGMA, size=(h, w))
    img = img + np.where(sector, noise, 0.0)
    return np.clip(img, 0.0, 1.0)


def simulate_raters(true_criteria, true_gi: float, flip_noise: float, gi_noise: float, seed: int):
    """Three noisy expert re-gradings of one video.

    Each rater flips every criterion bit independently with probability
    ``flip_noise`` and reports an impression grade
    clamp(round(true_gi + Normal(0, gi_noise)), 0, 4).
    Returns (criteria (3, K) int array, gi (3,) int array).
    """
    bits = np.asarray(true_criteria).astype(int)
    rng = np.random.default_rng(seed)
    flips = rng.random((3, bits.size)) < flip_noise
    criteria = np.abs(bits[None, :] - flips.astype(int))
    gi = np.clip(np.rint(true_gi + rng.normal(0.0, gi_noise, size=3)), 0, 4).astype(int)
    return criteria, gi


def _video_records(config: GenConfig, pid: int, skill: float) -> list[ExamRecord]:
    records = []
    for view in DEFAULT_VIEWS:
        k = view.n_criteria
        rng_c = derive_rng(config.seed, "criteria", pid, view.view_id)
        p = np.clip(skill + rng_c.uniform(-0.1, 0.1, size=k), 0.0, 1.0)
        bits = (rng_c.random(k) < p).astype(int)
        true_cp = checklist_score(bits)
        true_gi = 4.0 * true_cp / 100.0
        criteria, gi = simulate_raters(
            bits,
            true_gi,
            config.flip_noise,
            config.gi_noise,
            derive_seed(config.seed, "raters", pid, view.view_id),
        )
        if config.missing_prob > 0.0:
            rng_d = derive_rng(config.seed, "dropout", pid, view.view_id)
            if rng_d.random() < config.missing_prob:
                continue
        mean_cp = float(np.mean([checklist_score(row) for row in criteria]))
        mean_gi = float(np.mean(gi))
        paths = [
            f"p{pid}/v{view.view_id}/f{i}.pgm" for i in range(config.frames)
        ]
        records.append(
            ExamRecord(
                participant_id=pid,
                view_id=view.view_id,
                video_id=f"p{pid}_v{view.view_id}",
                frame_paths=paths,
                rater_criteria=criteria.tolist(),
                rater_gi=gi.tolist(),
                mean_cp=mean_cp,
                mean_gi=mean_gi,
                true_criteria=bits.tolist(),
            )
        )
    return records


def generate_records(config: GenConfig) -> list[ExamRecord]:
    """Scores and labels for every stored video, without rendering frames."""
    skills = participant_skills(config.participants)
    records = []
    for pid, skill in enumerate(skills, start=1):
        records.extend(_video_records(config, pid, float(skill)))
    return records


def _render_participant(config: GenConfig, out_dir: Path, records: list[ExamRecord]):
    for rec in records:
        view = DEFAULT_VIEWS[rec.view_id - 1]
        for i, rel in enumerate(rec.frame_paths):
            img = render_frame(
                view,
                rec.true_criteria,
                phase=i / config.frames,
                seed=derive_seed(config.seed, "frame", rec.participant_id, rec.view_id, i),
                image_hw=config.image_hw,
            )
            path = out_dir / rel
            path.parent.mkdir(parents=True, exist_ok=True)
            write_pgm(path, img)


def generate_dataset(config: GenConfig, out_dir, threads: int = 1) -> list[ExamRecord]:
    """Render the full dataset tree: PGM frames plus a JSON-lines manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    records = generate_records(config)
    by_pid: dict[int, list[ExamRecord]] = {}
    for rec in records:
        by_pid.setdefault(rec.participant_id, []).append(rec)
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            futures = [
                pool.submit(_render_participant, config, out, group)
                for group in by_pid.values()
            ]
            for f in futures:
                f.result()
    else:
        for group in by_pid.values():
            _render_participant(config, out, group)
    write_manifest(out / "manifest.jsonl", records)
    return records


def write_manifest(path, records: list[ExamRecord]) -> None:
    text = "".join(rec.to_json() + "\n" for rec in records)
    Path(path).write_text(text)


def read_manifest(path) -> list[ExamRecord]:
    p = Path(path)
    if not p.exists():
        raise DataError(f"manifest not found: {p}")
    records = [ExamRecord.from_json(line) for line in p.read_text().splitlines() if line]
    if not records:
        raise DataError(f"manifest is empty: {p}")
    return records


def split_by_participant(
    records: list[ExamRecord],
    train_fraction: float = DEFAULT_TRAIN_FRACTION,
    seed: int = 0,
):
    """Partition videos at participant granularity; returns (train, test)."""
    pids = sorted({rec.participant_id for rec in records})
    if len(pids) < 2:
        raise DataError("need at least 2 participants to split")
    n_train = round(train_fraction * len(pids))
    if not 1 <= n_train <= len(pids) - 1:
        raise DataError(
            f"degenerate split: {n_train} of {len(pids)} participants in train"
        )
    rng = derive_rng(seed, "split")
    order = rng.permutation(len(pids))
    train_ids = {pids[i] for i in order[:n_train]}
    train = [rec for rec in records if rec.participant_id in train_ids]
    test = [rec for rec in records if rec.participant_id not in train_ids]
    return train, test


def write_pgm(path, img: Array) -> None:
    """8-bit binary PGM (P5)."""
    h, w = img.shape
    data = np.rint(np.clip(img, 0.0, 1.0) * 255.0).astype(np.uint8)
    with open(path, "wb") as fh:
        fh.write(f"P5\n{w} {h}\n255\n".encode())
        fh.write(data.tobytes())


def read_pgm(path) -> Array:
    blob = Path(path).read_bytes()
    if not blob.startswith(b"P5"):
        raise DataError(f"{path}: not a binary PGM file")
    fields = []
    pos = 2
    while len(fields) < 3:
        while pos < len(blob) and blob[pos : pos + 1].isspace():
            pos += 1
        if blob[pos : pos + 1] == b"#":  # comment line
            pos = blob.index(b"\n", pos) + 1
            continue
        start = pos
        while pos < len(blob) and not blob[pos : pos + 1].isspace():
            pos += 1
        fields.append(int(blob[start:pos]))
    pos += 1  # single whitespace after maxval
    w, h, maxval = fields
    data = np.frombuffer(blob, dtype=np.uint8, count=h * w, offset=pos)
    return data.reshape(h, w).astype(np.float64) / float(maxval)


@dataclass
class FrameSet:
    """Flat frame arrays for training/eval plus per-frame video bookkeeping."""

    images: Array  # (n, 1, h, w)
    scores: Array  # (n,), normalised to [0, 1]
    views: Array  # (n,), class indices 0..9
    video_ids: list[str]
    video_truth: dict[str, float]  # de-normalised score label per video

    def __len__(self):
        return self.images.shape[0]


SCORE_SCALES = {"cp": 100.0, "gi": 4.0}


def load_frames(root, records: list[ExamRecord], target: str = "cp") -> FrameSet:
    """Load every frame of the given videos with normalised labels."""
    if target not in SCORE_SCALES:
        raise ConfigError(f"target must be 'cp' or 'gi', got {target!r}")
    scale = SCORE_SCALES[target]
    root = Path(root)
    images, scores, views, video_ids = [], [], [], []
    truth = {}
    for rec in records:
        label = rec.mean_cp if target == "cp" else rec.mean_gi
        truth[rec.video_id] = label
        for rel in rec.frame_paths:
            images.append(read_pgm(root / rel))
            scores.append(label / scale)
            views.append(rec.view_id - 1)
            video_ids.append(rec.video_id)
    if not images:
        raise DataError("no frames found for the given records")
    return FrameSet(
        images=np.stack(images)[:, None, :, :],
        scores=np.asarray(scores),
        views=np.asarray(views, dtype=np.intp),
        video_ids=video_ids,
        video_truth=truth,
    )
