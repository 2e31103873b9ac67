#!/usr/bin/env python3
"""Regenerate the bundled feeder fixtures in data/.

The fixtures are synthetic radial feeders that follow the topology of the
IEEE 13- and 34-node test feeders. Every line is modeled as three-phase so
that all eleven shunt fault classes can be simulated on every line. Line
impedances come from typical overhead configurations scaled by length;
regulators and the in-line transformer are replaced by short lines.

Usage: python3 tools/make_fixtures.py [output_dir]
"""

import json
import math
import sys
from pathlib import Path

FT_PER_MILE = 5280.0

# Ohm/mile phase impedance matrices (upper triangle mirrored).
CONFIG_300 = [
    [(1.3368, 1.3343), (0.2101, 0.5779), (0.2130, 0.5015)],
    [(0.2101, 0.5779), (1.3238, 1.3569), (0.2066, 0.4591)],
    [(0.2130, 0.5015), (0.2066, 0.4591), (1.3294, 1.3471)],
]
CONFIG_301 = [
    [(1.9300, 1.4115), (0.2327, 0.6442), (0.2359, 0.5691)],
    [(0.2327, 0.6442), (1.9157, 1.4281), (0.2288, 0.5238)],
    [(0.2359, 0.5691), (0.2288, 0.5238), (1.9219, 1.4209)],
]
CONFIG_601 = [
    [(0.3465, 1.0179), (0.1560, 0.5017), (0.1580, 0.4236)],
    [(0.1560, 0.5017), (0.3375, 1.0478), (0.1535, 0.3849)],
    [(0.1580, 0.4236), (0.1535, 0.3849), (0.3414, 1.0348)],
]


def line_z(config, length_ft, zbase):
    scale = length_ft / FT_PER_MILE / zbase
    return [[[round(re * scale, 10), round(im * scale, 10)] for re, im in row]
            for row in config]


def diag_z(r, x):
    return [[[r, x] if i == j else [0.0, 0.0] for j in range(3)] for i in range(3)]


def per_phase_pu(kw, kvar, power_va):
    return [round(kw * 1e3 / (power_va / 3.0), 10),
            round(kvar * 1e3 / (power_va / 3.0), 10)]


def pv_profile():
    out = []
    for h in range(24):
        if 6 <= h <= 18:
            out.append(round(math.sin(math.pi * (h - 6) / 12.0), 6))
        else:
            out.append(0.0)
    return out


WIND_PROFILE = [0.62, 0.70, 0.74, 0.71, 0.66, 0.58, 0.49, 0.41, 0.36, 0.30,
                0.27, 0.25, 0.28, 0.33, 0.38, 0.44, 0.52, 0.60, 0.69, 0.77,
                0.82, 0.80, 0.74, 0.68]


def feeder34():
    voltage_v = 24900.0
    power_va = 1.0e6
    zbase = voltage_v ** 2 / power_va
    edges = [
        ("800", "802", 2580, CONFIG_300), ("802", "806", 1730, CONFIG_300),
        ("806", "808", 32230, CONFIG_300), ("808", "810", 5804, CONFIG_301),
        ("808", "812", 37500, CONFIG_300), ("812", "814", 29730, CONFIG_300),
        ("814", "850", 10, CONFIG_301), ("816", "818", 1710, CONFIG_301),
        ("816", "824", 10210, CONFIG_301), ("818", "820", 48150, CONFIG_301),
        ("820", "822", 13740, CONFIG_301), ("824", "826", 3030, CONFIG_301),
        ("824", "828", 840, CONFIG_301), ("828", "830", 20440, CONFIG_301),
        ("830", "854", 520, CONFIG_301), ("832", "858", 4900, CONFIG_301),
        ("834", "860", 2020, CONFIG_301), ("834", "842", 280, CONFIG_301),
        ("836", "840", 860, CONFIG_301), ("836", "862", 280, CONFIG_301),
        ("842", "844", 1350, CONFIG_301), ("844", "846", 3640, CONFIG_301),
        ("846", "848", 530, CONFIG_301), ("850", "816", 310, CONFIG_301),
        ("852", "832", 10, CONFIG_301), ("854", "856", 23330, CONFIG_301),
        ("854", "852", 36830, CONFIG_301), ("858", "864", 1620, CONFIG_301),
        ("858", "834", 5830, CONFIG_301), ("860", "836", 2680, CONFIG_301),
        ("862", "838", 4860, CONFIG_301), ("888", "890", 10560, CONFIG_300),
    ]
    lines = []
    for a, b, ft, cfg in edges:
        lines.append({"id": f"{a}-{b}", "from": a, "to": b, "phases": "ABC",
                      "z": line_z(cfg, ft, zbase)})
    # Substation transformer 24.9/4.16 kV, 500 kVA, 1.9 + j4.08 %.
    lines.append({"id": "832-888", "from": "832", "to": "888", "phases": "ABC",
                  "z": diag_z(0.019 * power_va / 500e3, 0.0408 * power_va / 500e3)})
    bus_ids = sorted({e[0] for e in edges} | {e[1] for e in edges} | {"888"})
    buses = [{"id": b, "phases": "ABC"} for b in bus_ids]

    # Spot loads plus distributed loads lumped at the receiving bus.
    raw_loads = {
        "806": {"B": (30, 15), "C": (25, 14)},
        "810": {"B": (16, 8)},
        "820": {"A": (34, 17)},
        "822": {"A": (135, 70)},
        "824": {"B": (5, 2)},
        "826": {"B": (40, 20)},
        "828": {"C": (4, 2)},
        "830": {"A": (17, 13), "B": (10, 10), "C": (25, 10)},
        "856": {"B": (4, 2)},
        "858": {"A": (7, 3), "B": (2, 1), "C": (6, 3)},
        "864": {"A": (2, 1)},
        "834": {"A": (4, 2), "B": (15, 8), "C": (13, 7)},
        "860": {"A": (36, 24), "B": (40, 26), "C": (130, 71)},
        "836": {"A": (30, 15), "B": (10, 6), "C": (42, 22)},
        "840": {"A": (27, 16), "B": (31, 18), "C": (9, 7)},
        "838": {"B": (28, 14)},
        "844": {"A": (144, 110), "B": (135, 105), "C": (135, 105)},
        "846": {"B": (25, 12), "C": (20, 11)},
        "848": {"A": (20, 16), "B": (43, 27), "C": (20, 16)},
        "890": {"A": (150, 75), "B": (150, 75), "C": (150, 75)},
    }
    loads = []
    for bus in sorted(raw_loads):
        loads.append({"bus": bus, "power": {ph: per_phase_pu(p, q, power_va)
                                            for ph, (p, q) in sorted(raw_loads[bus].items())}})
    ders = [
        {"id": "PV1", "bus": "840", "kind": "PV", "rating_kw": 240.0,
         "power_factor": 1.0, "profile": pv_profile()},
        {"id": "WTG1", "bus": "844", "kind": "WTG", "rating_kw": 250.0,
         "power_factor": 0.96, "profile": WIND_PROFILE},
        {"id": "DG1", "bus": "890", "kind": "DG", "rating_kw": 180.0,
         "power_factor": 0.98, "profile": [1.0] * 24},
    ]
    return {
        "name": "feeder34",
        "base": {"voltage_v": voltage_v, "power_va": power_va},
        "source": {"bus": "800", "voltage_pu": 1.05, "z": [0.0005, 0.005]},
        "buses": buses, "lines": lines, "loads": loads, "ders": ders,
    }


def feeder12():
    voltage_v = 4160.0
    power_va = 5.0e6
    zbase = voltage_v ** 2 / power_va
    edges = [
        ("650", "632", 2000), ("632", "633", 500), ("632", "645", 500),
        ("645", "646", 300), ("632", "671", 2000), ("671", "680", 1000),
        ("671", "684", 300), ("684", "611", 300), ("684", "652", 800),
        ("671", "692", 10), ("692", "675", 500),
    ]
    lines = [{"id": f"{a}-{b}", "from": a, "to": b, "phases": "ABC",
              "z": line_z(CONFIG_601, ft, zbase)} for a, b, ft in edges]
    bus_ids = sorted({e[0] for e in edges} | {e[1] for e in edges})
    buses = [{"id": b, "phases": "ABC"} for b in bus_ids]
    raw_loads = {
        "611": {"C": (170, 80)},
        "645": {"B": (170, 125)},
        "646": {"B": (230, 132)},
        "652": {"A": (128, 86)},
        "671": {"A": (402, 230), "B": (451, 258), "C": (502, 288)},
        "675": {"A": (485, 190), "B": (68, 60), "C": (290, 212)},
        "692": {"C": (170, 151)},
    }
    loads = [{"bus": bus, "power": {ph: per_phase_pu(p, q, power_va)
                                    for ph, (p, q) in sorted(raw_loads[bus].items())}}
             for bus in sorted(raw_loads)]
    ders = [{"id": "PV1", "bus": "675", "kind": "PV", "rating_kw": 300.0,
             "power_factor": 1.0, "profile": pv_profile()}]
    return {
        "name": "feeder12",
        "base": {"voltage_v": voltage_v, "power_va": power_va},
        "source": {"bus": "650", "voltage_pu": 1.0, "z": [0.001, 0.01]},
        "buses": buses, "lines": lines, "loads": loads, "ders": ders,
    }


def main():
    out_dir = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parent.parent / "data"
    out_dir.mkdir(parents=True, exist_ok=True)
    for name, model in (("feeder12.json", feeder12()), ("feeder34.json", feeder34())):
        (out_dir / name).write_text(json.dumps(model, indent=1) + "\n")
        print(f"wrote {out_dir / name}: {len(model['buses'])} buses, {len(model['lines'])} lines")


if __name__ == "__main__":
    main()
