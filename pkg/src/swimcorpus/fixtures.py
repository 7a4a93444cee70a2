"""Deterministic synthetic source corpus for tests, demos, and dry runs.

Everything is generated from one seed: prose manuals, a physiology
handbook, competition results, two ingestible tables, a wide analysis
table with planted correlations, and per-athlete kinematic baselines.
Regenerating with the same seed reproduces every file byte for byte.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from pathlib import Path
from typing import Union

from .models import IMU_CHANNELS

STROKES = ["Freestyle", "Backstroke", "Breaststroke", "Butterfly", "IM"]
PHASES = ["Base", "Build", "Peak", "Taper", "Recovery"]

# Correlations planted in the analysis table; tests assert the anchor
# search finds exactly these and nothing structurally different.
PLANTED_FATIGUE_PAIR = ("fatigue_score", "imu3_acc_z")      # exact linear, r = -1
PLANTED_HRV_PAIR = ("hrv", "imu7_acc_x")                    # r around 0.97
PLANTED_LOAD_PAIR = ("training_load_au", "split_time_s")    # r around 0.85
PLANTED_ADAPTATION_PAIR = ("adaptation_pct", "vo2max")      # r around 0.75
PLANTED_STROKE_PAIR = ("stroke_prob", "imu2_gyro_x")        # strong inside Freestyle only

FREESTYLE_DRILLS = [
    "Catch-Up Freestyle",
    "Fingertip Drag",
    "Fist Swimming",
    "Single-Arm Pull",
    "Kick-on-Side Progression",
    "Front Sculling Series",
    "Tempo Ladder",
    "Descend Ladder",
]

BACKSTROKE_DRILLS = [
    "Double-Arm Backstroke",
    "Spin Drill",
    "One-Arm Rotation",
    "Cup Balance Drill",
    "Underwater Dolphin Ladder",
]

_DRILL_FOCUS = [
    "the front-quadrant timing of the stroke",
    "a long body line and quiet entry",
    "feel for still water at the catch",
    "symmetric rotation around the long axis",
    "a steady kick rhythm beneath a stable torso",
    "pressure awareness through the forearm",
    "rate control without losing stroke length",
    "pacing discipline across a descending set",
]

_DRILL_FAULT = [
    "a dropped elbow during the pull",
    "crossing the midline at hand entry",
    "a pause that collapses into a glide stall",
    "over-rotation that pulls the hips off line",
    "a scissor kick sneaking in on the breath",
    "rushed turnover when breathing frequency rises",
    "a flat wrist that loses the water",
    "splitting the last repetitions too aggressively",
]


@dataclass(frozen=True)
class FixturePaths:
    root: Path
    source_root: Path
    analysis_table: Path
    kinematic_baselines: Path


def _write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text, encoding="utf-8")


def _write_folder_info(folder: Path, info: dict) -> None:
    _write(folder / "_folder_info.json", json.dumps(info, indent=2) + "\n")


def _drill_text(index: int, name: str, rng: random.Random, focus: str, fault: str) -> str:
    reps = rng.choice([4, 6, 8, 10, 12])
    dist = rng.choice([25, 50, 75])
    rest = rng.choice([15, 20, 30, 45])
    tempo = rng.choice(["1.15", "1.25", "1.35", "1.45"])
    prog = rng.choice([25, 50])
    lines = [
        f"Drill {index}. {name}",
        f"Swim {reps} repetitions of {dist} metres with {rest} seconds of rest "
        f"between efforts. The {name} pattern develops {focus} and rewards a "
        "patient, unhurried stroke cycle. Hold a cycle tempo near "
        f"{tempo} seconds and keep the entry quiet at the front of the stroke. "
        f"The most common fault to watch for is {fault}, and the set should be "
        "stopped early whenever the movement pattern degrades rather than "
        "swum to completion on poor technique. Progress the drill by adding "
        f"{prog} metres to each repetition once the athlete holds the pattern "
        "comfortably, and regress to shorter efforts when form breaks down. "
        "A deliberate exhale keeps the body line long, the hips riding high, "
        "and the head still between breaths.",
    ]
    return "\n".join(lines)


def _freestyle_manual(rng: random.Random) -> str:
    parts = [
        "Freestyle Technique Drill Manual",
        "",
        "The following progressions are ordered from foundational balance work "
        "to race-specific rate control. Each drill names its prescription, the "
        "coaching focus, the dominant fault pattern, and how to progress or "
        "regress the task. Distances are in metres and rest is in seconds.",
        "",
    ]
    for i, name in enumerate(FREESTYLE_DRILLS, start=1):
        parts.append(_drill_text(i, name, rng,
                                 _DRILL_FOCUS[(i - 1) % len(_DRILL_FOCUS)],
                                 _DRILL_FAULT[(i - 1) % len(_DRILL_FAULT)]))
        parts.append("")
    return "\n".join(parts)


def _backstroke_manual(rng: random.Random) -> str:
    parts = [
        "Backstroke Technique Drill Manual",
        "",
        "These backstroke progressions emphasize rhythm and rotation. They "
        "pair naturally with the freestyle balance work and reuse the same "
        "prescription format of repetitions, distance, and rest.",
        "",
    ]
    for i, name in enumerate(BACKSTROKE_DRILLS, start=1):
        parts.append(_drill_text(i, name, rng,
                                 _DRILL_FOCUS[(i + 2) % len(_DRILL_FOCUS)],
                                 _DRILL_FAULT[(i + 3) % len(_DRILL_FAULT)]))
        parts.append("")
    return "\n".join(parts)


def _handbook(rng: random.Random) -> str:
    del rng  # fixed prose; thresholds must stay stable across seeds
    sections = [
        (
            "# Fatigue Monitoring",
            "Subjective fatigue is scored each morning on a ten-point scale, and "
            "the squad convention treats any reading above 7.0 as a red flag for "
            "high-intensity work. A swimmer reporting 7.5 after a heavy block "
            "should be steered toward technique maintenance rather than toward "
            "further stress. Persistent readings above the 7.0 line across three "
            "consecutive mornings indicate accumulated fatigue that a single "
            "easy day will not clear, and the plan should be rebuilt around "
            "recovery before quality work resumes. The fatigue score is a blunt "
            "instrument on its own, which is why it is always read alongside "
            "heart-rate variability and the accumulated training load rather "
            "than in isolation. Coaches who chase performance through a rising "
            "fatigue trend trade short-term output for a long stall later in "
            "the season."
        ),
        (
            "# Heart Rate Variability",
            "Morning heart-rate variability is compared against each athlete's "
            "rolling baseline rather than against the squad average. A "
            "suppression of more than 15 percent below the individual baseline "
            "marks the autonomic system as still loaded, and prescriptions on "
            "such mornings should stay aerobic. A reading 10 percent below "
            "baseline sits inside normal day-to-day noise for most swimmers. "
            "The baseline itself is recomputed over a rolling four-week window "
            "so that seasonal drift does not masquerade as acute suppression. "
            "When suppression beyond the 15 percent line coincides with an "
            "elevated morning heart rate, the combination is treated as a "
            "stronger signal than either measure alone, and the day's plan "
            "shifts from development to circulation and technique."
        ),
        (
            "# Training Load Accumulation",
            "Session load is logged in arbitrary units as the product of "
            "duration and perceived intensity, and weekly accumulation above "
            "850 arbitrary units places a swimmer in the caution band where a "
            "deload recommendation is mandatory. Loads between 600 and 850 "
            "arbitrary units are sustainable for most senior athletes during a "
            "build block provided sleep and fueling hold up. Chronic load "
            "should rise by no more than 10 percent from week to week, because "
            "faster ramps are the single most reliable predictor of breakdown "
            "in our records. A planned deload week reduces accumulated load by "
            "roughly 40 percent while keeping movement frequency high, which "
            "preserves feel for the water while the tissues recover."
        ),
        (
            "# Intensity Zone Framework",
            "Prescriptions reference six intensity zones: Recovery, EasyAerobic, "
            "Threshold, VO2max, RacePace, and Supramaximal. Athletes whose "
            "aerobic profile sits in the lower third of the squad are limited "
            "to the first three zones until their capacity develops, because "
            "high-intensity work on an undeveloped aerobic base produces "
            "fatigue without adaptation. The middle third may add VO2max and "
            "RacePace work in measured doses. Supramaximal efforts are "
            "reserved for athletes in the upper third of the aerobic profile "
            "and are capped at twice per week even there. Zone assignment is "
            "revisited after each test set rather than fixed for a season, and "
            "an athlete can move between bands in either direction."
        ),
        (
            "# Adaptation and Productive Overreaching",
            "A rising adaptation response above the squad's seventy-fifth "
            "percentile alongside elevated fatigue is the classic signature of "
            "productive overreaching rather than of overtraining. In that "
            "state, prescribing complete rest throws away a supercompensation "
            "window, and the correct move is reduced but continued training "
            "with the paradox explicitly acknowledged in the plan. Adaptation "
            "responses near 8 percent above baseline with stable mood and "
            "sleep are strong evidence that the block is working. The "
            "distinction matters because the two states share a fatigue "
            "profile yet demand opposite prescriptions, and the cost of "
            "misreading them is measured in weeks."
        ),
        (
            "# Recovery Protocols",
            "Recovery windows are individual: the required gap before the next "
            "quality session ranges from 24 to 72 hours across the squad, and "
            "scheduling a hard session inside an athlete's window is treated "
            "as a planning error regardless of how the athlete reports "
            "feeling. Sleep remains the dominant recovery input, with 8.5 "
            "hours the working target during heavy blocks. Hydration is "
            "checked each morning and a level below 0.50 on the normalized "
            "scale triggers an intake protocol before the first session. "
            "Stroke confidence from the kinematic classifier is also read as "
            "a recovery signal, since a value below 0.60 usually means "
            "fatigue has deformed the movement pattern even when the athlete "
            "self-reports as fresh."
        ),
        (
            "# Stroke Confidence and Kinematic Baselines",
            "Each athlete wears ten inertial sensors whose streams feed a "
            "stroke classifier and a per-segment deviation profile. The "
            "classifier's stroke confidence runs from 0 to 1, and the squad "
            "threshold of 0.60 separates a recognizable stroke pattern from "
            "fatigue-driven deformation. Segment deviations are expressed as "
            "z-scores against the athlete's own baseline, and a drill "
            "targeting a segment is only defensible when that segment shows a "
            "statistically meaningful deviation of at least 2.0 standard "
            "units. Prescribing corrective work against a quiet segment "
            "wastes a session and teaches the athlete to distrust the "
            "monitoring, so the deviation profile is checked before every "
            "technical block."
        ),
    ]
    out = ["Training Physiology Handbook", ""]
    for heading, body in sections:
        out.append(heading)
        out.append("")
        out.append(body)
        out.append("")
    return "\n".join(out)


def _competition_results(rng: random.Random) -> str:
    events = [
        ("Event 1 Women 100 Freestyle Final", 100, 53.0),
        ("Event 2 Men 100 Freestyle Final", 100, 48.5),
        ("Event 3 Women 200 Backstroke Final", 200, 128.0),
        ("Event 4 Men 100 Breaststroke Final", 100, 59.5),
        ("Event 5 Women 100 Butterfly Final", 100, 57.5),
        ("Event 6 Men 400 Individual Medley Final", 400, 255.0),
    ]
    first = [
        "Mira", "Lena", "Dana", "Iris", "Nora", "Tessa", "Alva", "Petra",
        "Daniel", "Viktor", "Jonas", "Marek", "Oskar", "Ruben", "Felix", "Anton",
    ]
    last = [
        "Kovacs", "Lindqvist", "Okafor", "Brandt", "Sorensen", "Vidal",
        "Keller", "Madsen", "Novak", "Fischer", "Hansen", "Weber",
    ]
    parts = [
        "Spring Invitational Results",
        "",
        "Finals results with reaction times and closing splits. Times are in "
        "seconds.",
        "",
    ]
    for title, dist, base in events:
        parts.append(title)
        lines = []
        t = base
        for place in range(1, 6):
            t += rng.uniform(0.12, 0.9)
            name = f"{rng.choice(first)} {rng.choice(last)}"
            reaction = rng.uniform(0.58, 0.74)
            closing = t * (0.26 if dist == 100 else 0.13) + rng.uniform(-0.3, 0.3)
            lines.append(
                f"Place {place}: {name} finished in {t:.2f} seconds with a "
                f"reaction time of {reaction:.2f} seconds and a closing split "
                f"of {closing:.2f} seconds."
            )
        parts.append(" ".join(lines))
        parts.append("")
    return "\n".join(parts)


def _athlete_profiles_csv(rng: random.Random) -> str:
    header = [
        "athlete_id", "stroke_type", "training_phase", "fatigue_score",
        "recovery_time_hr", "hrv", "stroke_prob", "training_load_au",
        "adaptation_pct", "vo2max", "split_time_s",
    ]
    rows = [",".join(header)]
    for i in range(1, 25):
        stroke = STROKES[(i - 1) % len(STROKES)]
        phase = PHASES[(i - 1) % len(PHASES)]
        fatigue = rng.uniform(2.0, 9.0)
        recovery = rng.uniform(16.0, 70.0)
        hrv = rng.uniform(52.0, 102.0)
        prob = rng.uniform(0.38, 0.97)
        load = rng.uniform(320.0, 980.0)
        adaptation = rng.uniform(0.0, 11.0)
        vo2 = rng.uniform(40.0, 68.0)
        split = rng.uniform(52.0, 76.0)
        rows.append(",".join([
            f"pro{i:03d}", stroke, phase, f"{fatigue:.2f}", f"{recovery:.1f}",
            f"{hrv:.1f}", f"{prob:.3f}", f"{load:.1f}", f"{adaptation:.2f}",
            f"{vo2:.1f}", f"{split:.2f}",
        ]))
    return "\n".join(rows) + "\n"


def _training_log_csv(rng: random.Random) -> str:
    header = [
        "athlete_id", "week", "stroke_type", "training_load_au",
        "fatigue_score", "hrv", "sleep_hours", "distance_km",
    ]
    rows = [",".join(header)]
    for i in range(1, 13):
        stroke = STROKES[(i - 1) % len(STROKES)]
        for week in range(1, 7):
            load = rng.uniform(340.0, 960.0)
            fatigue = rng.uniform(2.5, 8.8)
            hrv = rng.uniform(50.0, 100.0)
            sleep = rng.uniform(6.2, 9.4)
            distance = rng.uniform(18.0, 52.0)
            rows.append(",".join([
                f"log{i:03d}", str(week), stroke, f"{load:.1f}",
                f"{fatigue:.2f}", f"{hrv:.1f}", f"{sleep:.2f}",
                f"{distance:.1f}",
            ]))
    return "\n".join(rows) + "\n"


def _analysis_table_csv(rng: random.Random, athletes: int, weeks: int) -> str:
    header = ["athlete_id", "stroke_type", "training_phase",
              "fatigue_score", "recovery_time_hr", "adaptation_pct",
              "training_load_au", "vo2max", "hrv", "hrv_baseline",
              "stroke_prob", "hydration_level", "biomechanical_efficiency",
              "split_time_s"] + IMU_CHANNELS
    rows = [",".join(header)]
    for a in range(1, athletes + 1):
        athlete_id = f"swm{a:03d}"
        stroke = STROKES[(a - 1) % len(STROKES)]
        baseline = round(rng.uniform(55.0, 95.0), 4)
        for week in range(weeks):
            phase = PHASES[week % len(PHASES)]
            fatigue = round(rng.uniform(2.0, 9.5), 4)
            recovery = round(rng.uniform(12.0, 72.0), 4)
            adaptation = round(rng.uniform(0.0, 12.0), 4)
            load = round(rng.uniform(300.0, 1000.0), 4)
            vo2 = round(42.0 + 0.9 * adaptation + rng.gauss(0.0, 3.5), 4)
            hrv = round(baseline * rng.uniform(0.75, 1.10), 4)
            prob = round(rng.uniform(0.35, 0.98), 4)
            hydration = round(rng.uniform(0.45, 1.0), 4)
            biomech = round(rng.uniform(0.55, 0.95), 4)
            split = round(48.0 + 0.02 * load + rng.gauss(0.0, 2.5), 4)

            imu: dict[str, float] = {}
            for channel in IMU_CHANNELS:
                if channel == PLANTED_FATIGUE_PAIR[1]:
                    imu[channel] = round(10.0 - fatigue, 4)
                elif channel == PLANTED_HRV_PAIR[1]:
                    imu[channel] = round(0.1 * hrv + rng.gauss(0.0, 0.3), 4)
                elif channel == PLANTED_STROKE_PAIR[1]:
                    if stroke == "Freestyle":
                        imu[channel] = round(
                            250.0 * (prob - 0.66) + rng.gauss(0.0, 6.0), 4)
                    else:
                        imu[channel] = round(rng.uniform(-150.0, 150.0), 4)
                elif "_acc_" in channel:
                    imu[channel] = round(rng.uniform(-12.0, 12.0), 4)
                else:
                    imu[channel] = round(rng.uniform(-200.0, 200.0), 4)

            values = [athlete_id, stroke, phase,
                      f"{fatigue:.4f}", f"{recovery:.4f}", f"{adaptation:.4f}",
                      f"{load:.4f}", f"{vo2:.4f}", f"{hrv:.4f}",
                      f"{baseline:.4f}", f"{prob:.4f}", f"{hydration:.4f}",
                      f"{biomech:.4f}", f"{split:.4f}"]
            values.extend(f"{imu[c]:.4f}" for c in IMU_CHANNELS)
            rows.append(",".join(values))
    return "\n".join(rows) + "\n"


def _baselines_csv(rng: random.Random, athletes: int) -> str:
    rows = ["athlete_id,segment,z_score"]
    for a in range(1, athletes + 1):
        for segment in range(1, 11):
            if rng.random() < 0.3:
                z = rng.uniform(2.05, 3.4) * rng.choice([-1.0, 1.0])
            else:
                z = rng.uniform(-1.6, 1.6)
            rows.append(f"swm{a:03d},{segment},{z:.4f}")
    return "\n".join(rows) + "\n"


def write_noise_analysis_table(path: Union[str, Path], rows: int = 600,
                               seed: int = 7) -> Path:
    """A table with the same shape but no planted structure at all.

    Every per-stroke stratum must stay large (rows/5); at small n (~24)
    chance correlations in uniform noise can cross the 0.5 detection
    threshold, which would defeat the point of this fixture.
    """
    rng = random.Random(seed)
    path = Path(path)
    header = ["athlete_id", "stroke_type", "training_phase",
              "fatigue_score", "recovery_time_hr", "adaptation_pct",
              "training_load_au", "vo2max", "hrv", "hrv_baseline",
              "stroke_prob", "hydration_level", "biomechanical_efficiency",
              "split_time_s"] + IMU_CHANNELS
    lines = [",".join(header)]
    for i in range(rows):
        values = [f"nz{i:04d}", STROKES[i % len(STROKES)], PHASES[i % len(PHASES)],
                  f"{rng.uniform(2.0, 9.5):.4f}", f"{rng.uniform(12.0, 72.0):.4f}",
                  f"{rng.uniform(0.0, 12.0):.4f}", f"{rng.uniform(300.0, 1000.0):.4f}",
                  f"{rng.uniform(40.0, 70.0):.4f}", f"{rng.uniform(45.0, 105.0):.4f}",
                  f"{rng.uniform(55.0, 95.0):.4f}", f"{rng.uniform(0.35, 0.98):.4f}",
                  f"{rng.uniform(0.45, 1.0):.4f}", f"{rng.uniform(0.55, 0.95):.4f}",
                  f"{rng.uniform(50.0, 70.0):.4f}"]
        for channel in IMU_CHANNELS:
            width = 12.0 if "_acc_" in channel else 200.0
            values.append(f"{rng.uniform(-width, width):.4f}")
        lines.append(",".join(values))
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(lines) + "\n", encoding="utf-8")
    return path


def make_fixture_corpus(root: Union[str, Path], seed: int = 2024,
                        athletes: int = 40, weeks: int = 6) -> FixturePaths:
    """Write the full fixture tree under root and return its key paths."""
    root = Path(root)
    rng = random.Random(seed)
    src = root / "sources"

    _write_folder_info(src, {"stroke_type": "General"})

    manuals = src / "manuals"
    _write_folder_info(manuals, {"kind": "DrillManual", "stroke_type": "Freestyle"})
    _write(manuals / "freestyle_drills.md", _freestyle_manual(rng))
    backstroke = manuals / "backstroke"
    _write_folder_info(backstroke, {"stroke_type": "Backstroke"})
    _write(backstroke / "backstroke_drills.md", _backstroke_manual(rng))

    handbook = src / "handbook"
    _write_folder_info(handbook, {"kind": "PhysiologyHandbook",
                                  "complexity_level": "High"})
    _write(handbook / "training_physiology.md", _handbook(rng))

    results = src / "results"
    _write_folder_info(results, {"kind": "CompetitionResults"})
    _write(results / "spring_invitational.md", _competition_results(rng))

    tables = src / "tables"
    _write_folder_info(tables, {"kind": "TabularPhysiological"})
    _write(tables / "athlete_profiles.csv", _athlete_profiles_csv(rng))
    _write(tables / "weekly_training_log.csv", _training_log_csv(rng))

    analysis = root / "analysis"
    analysis_table = analysis / "athlete_table.csv"
    _write(analysis_table, _analysis_table_csv(rng, athletes, weeks))
    baselines = analysis / "kinematic_baselines.csv"
    _write(baselines, _baselines_csv(rng, athletes))

    return FixturePaths(
        root=root,
        source_root=src,
        analysis_table=analysis_table,
        kinematic_baselines=baselines,
    )
