#!/usr/bin/env python3
"""Generate the synthetic modified IEEE-33 scenario set under data/.

The branch and load data are the Baran-Wu 33-bus feeder (12.66 kV, 1 MVA base).
Impedances and loads are scaled so the baseline with all flexible fleets stays
inside the voltage band. Price series and building parameters are synthetic.
Output is deterministic for a given seed.
"""

import argparse
import json
import math
from pathlib import Path

import numpy as np

T = 24
DT = 1.0
V_BASE_KV = 12.66
S_BASE_KVA = 1000.0
Z_BASE = V_BASE_KV**2 / (S_BASE_KVA / 1000.0)

# from, to, R (ohm), X (ohm), P (kW), Q (kvar) at the receiving bus, 1-based buses
BRANCHES = [
    (1, 2, 0.0922, 0.0470, 100, 60), (2, 3, 0.4930, 0.2511, 90, 40),
    (3, 4, 0.3660, 0.1864, 120, 80), (4, 5, 0.3811, 0.1941, 60, 30),
    (5, 6, 0.8190, 0.7070, 60, 20), (6, 7, 0.1872, 0.6188, 200, 100),
    (7, 8, 0.7114, 0.2351, 200, 100), (8, 9, 1.0300, 0.7400, 60, 20),
    (9, 10, 1.0440, 0.7400, 60, 20), (10, 11, 0.1966, 0.0650, 45, 30),
    (11, 12, 0.3744, 0.1238, 60, 35), (12, 13, 1.4680, 1.1550, 60, 35),
    (13, 14, 0.5416, 0.7129, 120, 80), (14, 15, 0.5910, 0.5260, 60, 10),
    (15, 16, 0.7463, 0.5450, 60, 20), (16, 17, 1.2890, 1.7210, 60, 20),
    (17, 18, 0.7320, 0.5740, 90, 40), (2, 19, 0.1640, 0.1565, 90, 40),
    (19, 20, 1.5042, 1.3554, 90, 40), (20, 21, 0.4095, 0.4784, 90, 40),
    (21, 22, 0.7089, 0.9373, 90, 40), (3, 23, 0.4512, 0.3083, 90, 50),
    (23, 24, 0.8980, 0.7091, 420, 200), (24, 25, 0.8960, 0.7011, 420, 200),
    (6, 26, 0.2030, 0.1034, 60, 25), (26, 27, 0.2842, 0.1447, 60, 25),
    (27, 28, 1.0590, 0.9337, 60, 20), (28, 29, 0.8042, 0.7006, 120, 70),
    (29, 30, 0.5075, 0.2585, 200, 600), (30, 31, 0.9744, 0.9630, 150, 70),
    (31, 32, 0.3105, 0.3619, 210, 100), (32, 33, 0.3410, 0.5302, 60, 40),
]

# Daily residential shape, peak 1.0 in the evening.
LOAD_SHAPE = np.array([
    0.55, 0.50, 0.48, 0.47, 0.48, 0.52, 0.62, 0.74, 0.80, 0.78, 0.76, 0.75,
    0.74, 0.72, 0.72, 0.75, 0.82, 0.92, 1.00, 0.98, 0.90, 0.80, 0.68, 0.60,
])

# Synthetic hourly energy prices, EUR/MWh; rescaled to a mean of 63.06.
PRICE_SHAPE = np.array([
    55.0, 51.0, 49.0, 48.0, 49.0, 54.0, 63.0, 74.0, 78.0, 72.0, 64.0, 58.0,
    54.0, 52.0, 53.0, 57.0, 65.0, 79.0, 88.0, 84.0, 75.0, 67.0, 61.0, 57.0,
])
ENERGY_MEAN = 63.06
C_RU = 12.86
C_RD = 14.37

AMBIENT_K = 275.0 + 4.0 * np.sin(2.0 * math.pi * (np.arange(T) - 9.0) / 24.0)
SET_POINT_K = 293.0
POWER_FACTOR = 0.95


def hp_baseline(c, h, eta):
    a = math.exp(-DT * h / c)
    p = np.empty(T)
    prev = SET_POINT_K
    for t in range(T):
        p[t] = h / eta * ((SET_POINT_K - a * prev) / (1.0 - a) - AMBIENT_K[t])
        prev = SET_POINT_K
    return p


def ev_baseline(rated, arrive, depart, expected):
    p = np.zeros(T)
    left = expected
    for t in range(arrive, depart):
        p[t] = min(rated, left / DT)
        left -= p[t] * DT
    return p


def make_fleet(rng, n_ev=20, n_hp=40, n_bess=1):
    ders, base = [], np.zeros(T)
    for k in range(n_ev):
        rated = float(rng.choice([3.7, 7.4, 7.4, 11.0]))
        if k % 2 == 0:  # workplace charging
            arrive = int(rng.integers(6, 10))
            depart = int(rng.integers(15, 19))
        else:  # evening charging
            arrive = int(rng.integers(12, 17))
            depart = int(rng.integers(19, 23))
        window = depart - arrive
        expected = round(float(min(rated * window * DT * 0.8, rng.uniform(8.0, 25.0))), 2)
        e_min = round(0.7 * expected, 2)
        capacity = round(min(rated * window * DT, expected + float(rng.uniform(5.0, 15.0))), 2)
        ders.append({
            "kind": "EV", "id": f"ev{k:02d}", "capacity_kwh": capacity, "p_rated_kw": rated,
            "arrive_slot": arrive, "depart_slot": depart, "e_expected_kwh": expected,
            "e_min_kwh": e_min, "comp_departure_eur_per_kwh": 0.02,
            "comp_interim": [{"checkpoint": 23, "eur_per_kwh": 0.01}],
        })
        base += ev_baseline(rated, arrive, depart, expected)
    for k in range(n_hp):
        c = round(float(rng.uniform(8.0, 12.0)), 3)
        h = round(float(rng.uniform(0.2, 0.3)), 4)
        eta = round(float(rng.uniform(2.8, 3.2)), 3)
        ders.append({
            "kind": "HP", "id": f"hp{k:02d}", "capacitance_kwh_per_k": c, "conductance_kw_per_k": h,
            "cop": eta, "theta0_k": SET_POINT_K, "theta_amb_k": "ambient", "theta_set_k": "setpoint",
            "rho_up_eur_per_k": round(0.004 * h * DT / eta, 10),
            "rho_dn_eur_per_k": round(0.01 * h * DT / eta, 10),
            "dtheta_up_max_k": 1.0, "dtheta_dn_max_k": 1.0, "p_max_kw": 4.0,
        })
        base += hp_baseline(c, h, eta)
    for k in range(n_bess):
        ders.append({
            "kind": "BESS", "id": f"bess{k:02d}", "capacity_kwh": 200.0, "p_ch_max_kw": 50.0,
            "p_dis_max_kw": 50.0, "e0_kwh": 100.0, "balance_checkpoints": [8, 16],
            "comp_up_eur_per_kwh": 0.004, "comp_dn_eur_per_kwh": 0.008, "hard_terminal": True,
        })
    doc = {
        "description": "synthetic fleet: EVs, heat pumps and one battery",
        "T": T, "dt_h": DT,
        "profiles": {"ambient": [round(float(v), 6) for v in AMBIENT_K], "setpoint": SET_POINT_K},
        "ders": ders,
    }
    return doc, base


def lindistflow_voltages(r_pu, x_pu, p_node, q_node):
    """Squared voltages per node (0-based) for per-node net loads in kW/kvar."""
    n = len(p_node)
    children = {i: [] for i in range(n)}
    parent = {}
    for k, (f, t, _, _, _, _) in enumerate(BRANCHES):
        children[f - 1].append((t - 1, k))
        parent[t - 1] = k
    sub_p = p_node.copy()
    sub_q = q_node.copy()
    for f, t, *_ in reversed(BRANCHES):  # branch list is in topological order
        sub_p[f - 1] += sub_p[t - 1]
        sub_q[f - 1] += sub_q[t - 1]
    v = np.ones((n,) + p_node.shape[1:])
    for k, (f, t, *_) in enumerate(BRANCHES):
        v[t - 1] = v[f - 1] - 2.0 * (r_pu[k] * sub_p[t - 1] + x_pu[k] * sub_q[t - 1]) / S_BASE_KVA
    return v


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "data"))
    ap.add_argument("--seed", type=int, default=20240601)
    ap.add_argument("--impedance-scale", type=float, default=0.35)
    ap.add_argument("--load-scale", type=float, default=0.6)
    ap.add_argument("--shrink", type=float, default=0.9)
    args = ap.parse_args()

    out = Path(args.out)
    ieee = out / "ieee33"
    (ieee / "fleets").mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(args.seed)

    r_pu = np.array([b[2] for b in BRANCHES]) / Z_BASE * args.impedance_scale
    x_pu = np.array([b[3] for b in BRANCHES]) / Z_BASE * args.impedance_scale
    with open(ieee / "grid.txt", "w") as f:
        f.write("# modified IEEE-33 feeder (Baran-Wu data), nodes renumbered 0..32 with root 0\n")
        f.write(f"# impedances scaled by {args.impedance_scale}, loads by {args.load_scale} times a daily shape\n")
        f.write(f"s_base_kva {S_BASE_KVA:g}\nv_base_kv {V_BASE_KV:g}\n\n[profiles]\n")
        f.write("residential " + " ".join(f"{args.load_scale * v:.4f}" for v in LOAD_SHAPE) + "\n\n")
        f.write("[nodes]\n# id v_lo v_hi p_kw q_kvar profile\n")
        for b in BRANCHES:
            f.write(f"{b[1] - 1} 0.95 1.05 {b[4]} {b[5]} residential\n")
        f.write("\n[lines]\n# from to r_pu x_pu\n")
        for k, b in enumerate(BRANCHES):
            f.write(f"{b[0] - 1} {b[1] - 1} {r_pu[k]:.8g} {x_pu[k]:.8g}\n")

    energy = PRICE_SHAPE * ENERGY_MEAN / PRICE_SHAPE.mean()
    with open(ieee / "prices.csv", "w") as f:
        f.write("# synthetic day-ahead series (mean 63.06 EUR/MWh); constant reserve prices\n")
        f.write("slot,c_energy_eur_per_mwh,c_ru_eur_per_mw,c_rd_eur_per_mw\n")
        for t in range(T):
            f.write(f"{t},{energy[t]:.6f},{C_RU},{C_RD}\n")

    tan_g = math.tan(math.acos(POWER_FACTOR))
    p_node = np.zeros((33, T))
    q_node = np.zeros((33, T))
    for b in BRANCHES:
        p_node[b[1] - 1] += b[4] * args.load_scale * LOAD_SHAPE
        q_node[b[1] - 1] += b[5] * args.load_scale * LOAD_SHAPE
    aggregators = []
    fleets = {}
    for node in range(1, 33):
        doc, base = make_fleet(rng)
        name = f"agg{node:02d}.json"
        fleets[node] = doc
        with open(ieee / "fleets" / name, "w") as f:
            json.dump(doc, f, indent=1)
            f.write("\n")
        aggregators.append({"id": f"A{node:02d}", "node": node, "fleet": f"fleets/{name}",
                            "power_factor": POWER_FACTOR})
        p_node[node] += base
        q_node[node] += base * tan_g

    v = lindistflow_voltages(r_pu, x_pu, p_node, q_node)
    vmin = np.sqrt(v[1:].min())
    far = int(np.argmin(v[1:].min(axis=1))) + 1
    print(f"baseline min voltage {vmin:.5f} p.u. at node {far}")
    if vmin < 0.95:
        raise SystemExit("baseline violates the 0.95 p.u. limit; lower --load-scale or --impedance-scale")

    options = {"ignore_voltage": False, "shrink": args.shrink, "seed": 7, "random_probes": 8,
               "betas": [0.25, 0.5, 0.75, 1.0, 1.25, 1.5, 2.0], "single_aggregator": "A18"}
    base_doc = {
        "name": "ieee33_synthetic",
        "description": "modified IEEE-33 feeder, one aggregator per load node (synthetic data)",
        "T": T, "dt_h": DT, "grid": "grid.txt", "prices": "prices.csv",
        "price_scale": {"energy": 0.001, "reserve": 0.001},
        "aggregators": aggregators, "options": options,
    }
    with open(ieee / "scenario.json", "w") as f:
        json.dump(base_doc, f, indent=1)
        f.write("\n")

    # Raise the lower limit at the weakest node to just below its baseline minimum so the
    # down-reserve envelope runs into it while the baseline itself stays feasible.
    v_far = float(np.sqrt(v[far].min()))
    tight = dict(base_doc)
    tight["name"] = "ieee33_tight_voltage"
    tight["description"] = "same feeder with a raised lower voltage limit at the weakest node"
    tight["voltage_overrides"] = [{"node": far, "v_lo": round(v_far - 0.002, 6)}]
    with open(ieee / "scenario_tight.json", "w") as f:
        json.dump(tight, f, indent=1)
        f.write("\n")
    print(f"tight scenario: v_lo {tight['voltage_overrides'][0]['v_lo']} at node {far}")

    # Two aggregators with differently shaped fleets at one node.
    same = out / "same_node"
    same.mkdir(parents=True, exist_ok=True)
    ev_doc, _ = make_fleet(rng, n_ev=20, n_hp=0, n_bess=0)
    hp_doc, _ = make_fleet(rng, n_ev=0, n_hp=40, n_bess=1)
    for name, doc in (("ev_fleet.json", ev_doc), ("hp_fleet.json", hp_doc)):
        with open(same / name, "w") as f:
            json.dump(doc, f, indent=1)
            f.write("\n")
    same_doc = {
        "name": "two_aggregators_one_node",
        "description": "an EV fleet and a heat-pump fleet sharing node 17 of the modified IEEE-33 feeder",
        "T": T, "dt_h": DT, "grid": "../ieee33/grid.txt", "prices": "../ieee33/prices.csv",
        "price_scale": {"energy": 0.001, "reserve": 0.001},
        "aggregators": [
            {"id": "EV17", "node": 17, "fleet": "ev_fleet.json", "power_factor": POWER_FACTOR},
            {"id": "HP17", "node": 17, "fleet": "hp_fleet.json", "power_factor": POWER_FACTOR},
        ],
        "options": dict(options, single_aggregator="EV17"),
    }
    with open(same / "scenario.json", "w") as f:
        json.dump(same_doc, f, indent=1)
        f.write("\n")


if __name__ == "__main__":
    main()
