"""Writes the score fixtures next to this file.

Run with `python3 generate.py`. Output is deterministic.
"""

import json
import os
import random

HERE = os.path.dirname(os.path.abspath(__file__))

# lowest MIDI pitch per instrument family
REGISTER = {
    "piano": 48, "percussion": 36, "bass": 28, "trumpet": 58, "drums": 36,
    "saxophone": 49, "guitar": 40, "violins": 55, "violas": 48, "cellos": 36,
    "basses": 28, "flutes": 60, "oboes": 58, "clarinets": 50, "bassoons": 34,
    "horns": 41, "trumpets": 58, "trombones": 40, "tuba": 28, "harp": 36,
    "celesta": 60,
}
MAJOR = [0, 2, 4, 5, 7, 9, 11, 12, 14, 16]
CHROMATIC = list(range(13))


def notes(rng, instrument, beats, steps):
    base = REGISTER[instrument]
    out = []
    t = 0.0
    while t < beats - 1e-9:
        length = min(rng.choice([0.5, 1.0, 1.0, 2.0]), beats - t)
        out.append({
            "pitch": base + rng.choice(steps),
            "onsetBeats": t,
            "lengthBeats": length,
            "velocity": rng.randint(60, 100),
        })
        t += length
    return out


def pattern(rng, pid, instrument, beats, steps=MAJOR):
    return {
        "id": pid,
        "instrument": instrument,
        "durationBeats": beats,
        "notes": notes(rng, instrument, beats, steps),
    }


def write(name, doc):
    path = os.path.join(HERE, name)
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def jazz():
    rng = random.Random(8)
    layout = [
        ("piano", "Piano", "repeat", 8),
        ("percussion", "Percussion", "tank", 6),
        ("bass", "Bass", "repeat", 8),
        ("trumpet", "Trumpet", "repeat", 18),
        ("drums", "Drums", "repeat", 18),
        ("saxophone", "Sax", "repeat", 18),
        ("guitar", "Guitar", "repeat", 4),
    ]
    patterns, groups = [], []
    for inst, group, kind, n in layout:
        ids = []
        for i in range(n):
            pid = f"{group}{i + 1}"
            # 2 to 8 beats at 120 bpm: the longest pattern lasts 4 s
            patterns.append(pattern(rng, pid, inst, rng.choice([2, 4, 4, 8])))
            ids.append(pid)
        groups.append({"name": group, "kind": kind, "patterns": ids})
    orchestration = """\
// Guitar and bass open, piano and percussion join, then trumpet and
// sax solos alternate, the drums backing the sax.
module Jazz() {
    emit GuitarOut(true);
    emit BassOut(true);
    await count(3, BassIn.now || GuitarIn.now);
    emit PianoOut(true);
    await count(4, PianoIn.now);
    run Tank(sigarray = Percussion);
    loop {
        emit TrumpetOut(true);
        await count(6, TrumpetIn.now);
        emit TrumpetOut(false);
        emit SaxOut(true);
        emit DrumsOut(true);
        await count(6, SaxIn.now);
        emit SaxOut(false);
        emit DrumsOut(false);
    }
}
"""
    write("jazz.json", {
        "title": "Grand Loup",
        "tempoBpm": 120,
        "quantize": "beat",
        "beatsPerMeasure": 4,
        "instruments": [l[0] for l in layout],
        "patterns": patterns,
        "groups": groups,
        "orchestration": orchestration,
        "entryModule": "Jazz",
    })


CHROMATIC_SESSION = """\
module ChromaticSession() {
    fork {
        emit ChromBassOut(true); // activate the bass group
    } par {
        run Tank(sigarray = ChromPercuTank); // activate the percussion tank
    }
    await count(3, ChromBassIn.now); // wait for 3 bass selections
    fork {
        emit ChromViolinsOut(true);
    } par {
        await count(2, ChromBassIn.now);
    } par {
        emit ChromFlutesOut(true);
    } par {
        emit ChromBassonsOut(true);
    }
    emit ChromFlutesOut(false);
    emit ChromBassonsOut(false);
    fork {
        await count(10, ChromViolinsIn.now); // wait for 10 violins selections
    } par {
        emit ChromViolasOut(true);
    } par {
        emit ChromCellosOut(true);
    }
}
"""

CHROMATIC_GROUPS = [
    ("ChromBass", "basses", "repeat", 5, 1),
    ("ChromPercuTank", "percussion", "tank", 4, 1),
    ("ChromViolins", "violins", "repeat", 5, 2),
    ("ChromFlutes", "flutes", "repeat", 4, 2),
    ("ChromBassons", "bassoons", "repeat", 4, 2),
    ("ChromViolas", "violas", "repeat", 4, 2),
    ("ChromCellos", "cellos", "repeat", 4, 2),
]


def build_groups(rng, layout, patterns, groups, steps=MAJOR):
    for name, inst, kind, n, beats in layout:
        ids = []
        for i in range(n):
            pid = f"{name}{i + 1}" if kind == "tank" else f"{name}_{i + 1}"
            patterns.append(pattern(rng, pid, inst, beats, steps))
            ids.append(pid)
        groups.append({"name": name, "kind": kind, "patterns": ids})


def chromatic():
    rng = random.Random(3)
    patterns, groups = [], []
    build_groups(rng, CHROMATIC_GROUPS, patterns, groups, CHROMATIC)
    write("chromatic.json", {
        "title": "Chromatic session",
        "tempoBpm": 120,
        "quantize": "beat",
        "beatsPerMeasure": 4,
        "instruments": ["basses", "percussion", "violins", "flutes", "bassoons", "violas", "cellos"],
        "patterns": patterns,
        "groups": groups,
        "orchestration": CHROMATIC_SESSION,
        "entryModule": "ChromaticSession",
    })


OPUS_INSTRUMENTS = [
    "violins", "violas", "cellos", "basses", "flutes", "oboes", "clarinets",
    "bassoons", "horns", "trumpets", "trombones", "tuba", "percussion",
    "harp", "piano", "celesta",
]


def opus1():
    rng = random.Random(1)
    scale = [
        ("CelloScale", "cellos", "repeat", 5, 2),
        ("TrumpetScaleTank", "trumpets", "tank", 4, 2),
        ("HornScaleTank", "horns", "tank", 4, 2),
        ("TromboneScaleTank", "trombones", "tank", 4, 2),
        ("FluteScale", "flutes", "repeat", 4, 2),
        ("OboeScale", "oboes", "repeat", 4, 2),
        ("ClarinetScale", "clarinets", "repeat", 4, 2),
    ]
    tonal = [
        ("TonalHarp", "harp", "repeat", 4, 4),
        ("TonalPiano", "piano", "repeat", 4, 4),
        ("TonalCelestaTank", "celesta", "tank", 3, 2),
        ("TonalTuba", "tuba", "repeat", 4, 4),
        ("TonalHorns", "horns", "repeat", 4, 4),
    ]
    sessions = [("Scale", 18, MAJOR), ("Chrom", 18, CHROMATIC), ("Tonal", 18, MAJOR)]
    core_patterns = sum(g[3] for g in scale + CHROMATIC_GROUPS + tonal)
    filler_groups = sum(s[1] for s in sessions)
    spare = 270 - core_patterns
    # spread the remaining patterns over the colour groups, 3 or 4 each
    sizes = [spare // filler_groups] * filler_groups
    extra = spare - sum(sizes)
    for i in range(extra):
        sizes[i * filler_groups // extra] += 1

    patterns, groups = [], []
    build_groups(rng, scale, patterns, groups, MAJOR)
    build_groups(rng, CHROMATIC_GROUPS, patterns, groups, CHROMATIC)
    build_groups(rng, tonal, patterns, groups, MAJOR)
    colours = {}
    k = 0
    for prefix, n, steps in sessions:
        layout = []
        for i in range(n):
            inst = OPUS_INSTRUMENTS[(k * 5) % len(OPUS_INSTRUMENTS)]
            layout.append((f"{prefix}Colour{i + 1:02}", inst, "repeat", sizes[k], rng.choice([2, 4])))
            k += 1
        build_groups(rng, layout, patterns, groups, steps)
        colours[prefix] = [g[0] for g in layout]

    def emits(names, value):
        v = "true" if value else "false"
        return "\n".join(f"    emit {n}Out({v});" for n in names)

    scale_repeat = ["CelloScale", "FluteScale", "OboeScale", "ClarinetScale"]
    tonal_repeat = ["TonalHarp", "TonalPiano", "TonalTuba", "TonalHorns"]
    chrom_repeat = [g[0] for g in CHROMATIC_GROUPS if g[2] == "repeat"]
    orchestration = f"""\
module Opus1() {{
    run ScaleSession(...);
    run ChromaticPart(...);
    run TonalSession(...);
}}

module ScaleSession() {{
{emits(colours["Scale"], True)}
    emit CelloScaleOut(true);
    await count(5, CelloScaleIn.now);
    // the three tanks must all be empty before the woodwinds
    fork {{
        run Tank(sigarray = TrumpetScaleTank);
    }} par {{
        run Tank(sigarray = HornScaleTank);
    }} par {{
        run Tank(sigarray = TromboneScaleTank);
    }}
    emit FluteScaleOut(true);
    emit OboeScaleOut(true);
    emit ClarinetScaleOut(true);
    await count(6, FluteScaleIn.now || OboeScaleIn.now || ClarinetScaleIn.now);
{emits(scale_repeat + colours["Scale"], False)}
}}

{CHROMATIC_SESSION}
module ChromaticPart() {{
{emits(colours["Chrom"], True)}
    run ChromaticSession(...);
{emits(chrom_repeat + colours["Chrom"], False)}
}}

module TonalSession() {{
{emits(colours["Tonal"], True)}
    emit TonalHarpOut(true);
    emit TonalPianoOut(true);
    await count(4, TonalHarpIn.now);
    run Tank(sigarray = TonalCelestaTank);
    emit TonalTubaOut(true);
    emit TonalHornsOut(true);
    await count(4, TonalTubaIn.now || TonalHornsIn.now);
{emits(tonal_repeat + colours["Tonal"], False)}
}}
"""
    assert len(patterns) == 270, len(patterns)
    assert len(groups) == 73, len(groups)
    write("opus1.json", {
        "title": "Opus1",
        "tempoBpm": 96,
        "quantize": "beat",
        "beatsPerMeasure": 4,
        "instruments": OPUS_INSTRUMENTS,
        "patterns": patterns,
        "groups": groups,
        "orchestration": orchestration,
        "entryModule": "Opus1",
    })


def small(title, orchestration):
    rng = random.Random(0)
    return {
        "title": title,
        "tempoBpm": 120,
        "quantize": "beat",
        "beatsPerMeasure": 4,
        "instruments": ["bass"],
        "patterns": [pattern(rng, "B1", "bass", 2), pattern(rng, "B2", "bass", 2)],
        "groups": [{"name": "Bass", "kind": "repeat", "patterns": ["B1", "B2"]}],
        "orchestration": orchestration,
        "entryModule": "Main",
    }


def paradox():
    write("paradox.json", small("Paradox", """\
module Main() {
    signal A;
    emit BassOut(true);
    await (BassIn.now);
    if (A.now) {
        nothing;
    } else {
        emit A();
    }
}
"""))


def orphan():
    write("orphan.json", small("Orphan", """\
module Main() {
    emit BassOut(true);
    await count(2, BassIn.now);
    emit ViolinOut(true);
}
"""))


if __name__ == "__main__":
    jazz()
    chromatic()
    opus1()
    paradox()
    orphan()
