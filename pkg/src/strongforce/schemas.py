"""JSON schemas for experiment configs and emitted reports."""

_NUM = {"type": "number"}
_POS = {"type": "number", "exclusiveMinimum": 0}
_VEC3 = {"type": "array", "items": _NUM, "minItems": 3, "maxItems": 3}

CONFIG = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "experiment": {
            "enum": [
                "simulate", "classify", "excited-energy", "kepler-portrait",
                "twobody-dichotomy", "macmillan", "sweep",
            ]
        },
        "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
        "omega": _POS,
        "e_star": _NUM,
        "workers": {"type": "integer", "minimum": 1},
        "system": {
            "type": "object",
            "additionalProperties": False,
            "required": ["masses", "alpha"],
            "properties": {
                "masses": {"type": "array", "items": _POS, "minItems": 2},
                "alpha": _POS,
            },
        },
        "initial_state": {
            "type": "object",
            "additionalProperties": False,
            "required": ["positions", "velocities"],
            "properties": {
                "positions": {"type": "array", "items": _VEC3, "minItems": 2},
                "velocities": {"type": "array", "items": _VEC3, "minItems": 2},
            },
        },
        "generator": {
            "type": "object",
            "additionalProperties": False,
            "required": ["kind"],
            "properties": {
                "kind": {"enum": ["homothetic", "dispersing", "rotating"]},
                "circumradius": _POS,
                "spin": _NUM,
                "radial": _NUM,
                "size": _POS,
            },
        },
        "integrator": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                k: _POS
                for k in (
                    "rel_tol", "abs_tol", "h_init", "h_min", "h_max",
                    "collision_radius_factor", "t_max", "escape_window",
                    "collapse_distance_factor", "escape_inertia_factor",
                )
            },
        },
        "excited_energy": {
            "type": "object",
            "additionalProperties": False,
            "properties": {"restarts": {"type": "integer", "minimum": 0}},
        },
        "kepler": {
            "type": "object",
            "additionalProperties": False,
            "required": ["alpha", "c"],
            "properties": {
                "alpha": _POS,
                "c": _NUM,
                "r_min": _POS,
                "r_max": _POS,
                "points": {"type": "integer", "minimum": 10},
                "orbits": {"type": "integer", "minimum": 0},
            },
        },
        "twobody": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "m1": _POS,
                "m2": _POS,
                "alpha": _POS,
                "samples": {"type": "integer", "minimum": 1},
            },
        },
        "macmillan": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "alpha": _POS,
                "epsilon": {"type": "number", "minimum": 0},
                "z3_amplitude": _NUM,
                "t_max": _POS,
                "rho0": _POS,
            },
        },
        "sweep": {
            "type": "object",
            "additionalProperties": False,
            "required": ["base", "grid"],
            "properties": {
                "base": {"enum": ["classify", "excited-energy", "macmillan"]},
                "grid": {
                    "type": "object",
                    "minProperties": 1,
                    "additionalProperties": {"type": "array", "items": _NUM, "minItems": 1},
                },
            },
        },
    },
}

_EVENT = {
    "type": "object",
    "required": ["t", "kind"],
    "properties": {"t": _NUM, "kind": {"type": "string"}, "detail": {"type": "string"}},
}

_LABELS = ["K1Plus", "K1Minus", "K2Plus", "K2Minus", "OutOfK"]

SIMULATE = {
    "type": "object",
    "required": ["outcome", "events", "energy0", "max_energy_drift", "low_accuracy", "nsteps"],
    "properties": {
        "outcome": {"type": "object", "required": ["kind"]},
        "events": {"type": "array", "items": _EVENT},
        "energy0": _NUM,
        "max_energy_drift": _NUM,
        "low_accuracy": {"type": "boolean"},
        "nsteps": {"type": "integer"},
    },
}

CLASSIFY = {
    "type": "object",
    "required": ["outcome", "set_history", "transition_count", "theory_applies", "e_star", "omega"],
    "properties": {
        "outcome": {
            "type": "object",
            "required": ["kind", "reason"],
            "properties": {
                "kind": {"enum": ["Collision", "GlobalConsistent", "Undecided"]},
                "time": {"type": ["number", "null"]},
                "reason": {"type": "string"},
            },
        },
        "set_history": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["label", "t_start", "t_end"],
                "properties": {"label": {"enum": _LABELS}, "t_start": _NUM, "t_end": _NUM},
            },
        },
        "transition_count": {"type": "integer", "minimum": 0},
        "theory_applies": {"type": "boolean"},
        "e_star": _NUM,
        "omega": _POS,
        "events": {"type": "array", "items": _EVENT},
    },
}

EXCITED_ENERGY = {
    "type": "object",
    "required": ["e_star", "u_star", "multiplier", "degenerate", "minimizer"],
    "properties": {
        "e_star": {"type": ["number", "string"]},
        "u_star": {"type": ["number", "string"]},
        "multiplier": {"type": ["number", "null"]},
        "expected_multiplier": {"type": ["number", "null"]},
        "degenerate": {"type": "boolean"},
        "minimizer": {
            "type": ["object", "null"],
            "properties": {
                "positions": {"type": "array", "items": _VEC3},
                "residual": _NUM,
                "planar": {"type": "boolean"},
                "collinear": {"type": "boolean"},
            },
        },
        "candidate_energies": {"type": "array", "items": _NUM},
    },
}

DICHOTOMY = {
    "type": "object",
    "required": ["samples", "misclassified", "e_star", "a_star", "r0"],
    "properties": {
        "samples": {"type": "integer"},
        "misclassified": {"type": "integer", "minimum": 0},
        "e_star": _NUM,
        "a_star": _NUM,
        "r0": _NUM,
    },
}

MACMILLAN = {
    "type": "object",
    "required": ["alpha", "epsilon", "count", "transitions", "pattern_ok", "rho0"],
    "properties": {
        "alpha": _NUM,
        "epsilon": _NUM,
        "z3_amplitude": _NUM,
        "rho0": _NUM,
        "count": {"type": "integer", "minimum": 0},
        "transitions": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["t", "direction", "z3"],
                "properties": {"t": _NUM, "direction": {"enum": ["+-", "-+"]}, "z3": _NUM},
            },
        },
        "pattern_ok": {"type": "boolean"},
        "max_abs_k": _NUM,
        "end_time": _NUM,
        "stop_reason": {"type": "string"},
        "energy_drift": _NUM,
        "excited_energy": _NUM,
        "reference": {"type": "object"},
    },
}

KEPLER = {
    "type": "object",
    "required": ["alpha", "c", "r0", "v_star"],
    "properties": {"alpha": _NUM, "c": _NUM, "r0": _NUM, "v_star": _NUM},
}

SWEEP = {
    "type": "object",
    "required": ["base", "runs"],
    "properties": {
        "base": {"type": "string"},
        "runs": {
            "type": "array",
            "items": {
                "type": "object",
                "required": ["index", "params", "status"],
                "properties": {
                    "index": {"type": "integer"},
                    "params": {"type": "object"},
                    "status": {"enum": ["ok", "undecided", "error"]},
                },
            },
        },
    },
}

REPORTS = {
    "simulate": SIMULATE,
    "classify": CLASSIFY,
    "excited-energy": EXCITED_ENERGY,
    "twobody-dichotomy": DICHOTOMY,
    "macmillan": MACMILLAN,
    "kepler-portrait": KEPLER,
    "sweep": SWEEP,
}
