//! Hand-maintained JSON Schemas for the documents the CLI reads and writes.

use serde_json::{json, Value};

fn num() -> Value {
    json!({ "type": "number" })
}

fn quad(item: Value) -> Value {
    json!({ "type": "array", "items": item, "minItems": 4, "maxItems": 4 })
}

fn complex() -> Value {
    json!({ "type": "array", "items": { "type": "number" }, "minItems": 2, "maxItems": 2 })
}

fn object(props: Value, required: &[&str]) -> Value {
    json!({ "type": "object", "properties": props, "required": required, "additionalProperties": false })
}

fn optional_source() -> Value {
    json!({
        "pulse": { "$ref": "#/$defs/PulseSpec" },
        "theta1": num(),
        "frame": { "$ref": "#/$defs/FrameParams" },
        "design": { "type": "string", "description": "path to a design.json, relative to the config file" },
        "target": { "$ref": "#/$defs/GateTarget" }
    })
}

fn merge(mut a: Value, b: Value) -> Value {
    if let (Some(a), Value::Object(b)) = (a.as_object_mut(), b) {
        a.extend(b);
    }
    a
}

pub fn all() -> Value {
    let propagator = json!({ "enum": ["analytic", "rta-numeric", "exact-numeric"] });
    let simulate = merge(
        json!({
            "propagator": propagator,
            "include_xy": { "type": "boolean" },
            "step_control": { "$ref": "#/$defs/StepControl" },
            "input": { "$ref": "#/$defs/StateVector" },
            "t_end": { "type": "number", "minimum": 0 },
            "samples": { "type": "integer", "minimum": 1 }
        }),
        optional_source(),
    );
    let phases = merge(
        json!({
            "propagator": propagator,
            "include_xy": { "type": "boolean" },
            "step_control": { "$ref": "#/$defs/StepControl" },
            "options": { "$ref": "#/$defs/PhaseOptions" }
        }),
        optional_source(),
    );
    json!({
        "$schema": "https://json-schema.org/draft/2020-12/schema",
        "$ref": "#/$defs/RunConfig",
        "$defs": {
            "RunConfig": object(json!({
                "system": { "$ref": "#/$defs/SpinSystem" },
                "task": { "enum": ["design", "simulate", "phases", "verify", "sweep"] },
                "task_payload": { "oneOf": [
                    { "$ref": "#/$defs/DesignPayload" },
                    { "$ref": "#/$defs/SimulatePayload" },
                    { "$ref": "#/$defs/PhasesPayload" },
                    { "$ref": "#/$defs/VerifyPayload" },
                    { "$ref": "#/$defs/SweepPayload" }
                ]},
                "output_dir": { "type": "string", "default": "out" },
                "seed": { "type": "integer", "minimum": 0, "default": 0 }
            }), &["system", "task", "task_payload"]),
            "SpinSystem": object(json!({
                "omega1": num(), "omega2": num(), "J": num(), "gamma1": num(), "gamma2": num()
            }), &["omega1", "omega2", "J", "gamma1", "gamma2"]),
            "Harmonic": object(json!({ "omega": num(), "phi": num(), "amplitude": { "type": "number", "minimum": 0 } }),
                &["omega", "phi", "amplitude"]),
            "PulseSpec": object(json!({
                "harmonics": quad(json!({ "$ref": "#/$defs/Harmonic" })),
                "tau": { "type": "number", "minimum": 0 }
            }), &["harmonics", "tau"]),
            "FrameParams": object(json!({ "phi": quad(num()), "theta": quad(num()) }), &["phi", "theta"]),
            "StateVector": quad(complex()),
            "GateMatrix": quad(quad(complex())),
            "GateTarget": {
                "type": "object",
                "properties": {
                    "theta_targets": quad(num()),
                    "m": { "type": "integer", "minimum": 1 },
                    "n": { "type": "integer", "minimum": 1 },
                    "h1": { "type": "number", "exclusiveMinimum": 0 },
                    "tau": { "type": "number", "exclusiveMinimum": 0 }
                },
                "required": ["theta_targets", "m", "n"],
                "oneOf": [{ "required": ["h1"] }, { "required": ["tau"] }],
                "additionalProperties": false
            },
            "StepControl": object(json!({
                "steps_per_period": { "type": "integer", "minimum": 1, "default": 64 },
                "tolerance": { "type": "number", "default": 1e-8 },
                "max_steps_per_period": { "type": "integer", "default": 8192 },
                "picture": { "enum": ["lab", "interaction"], "default": "interaction" },
                "sample_stride": { "type": "integer", "minimum": 1, "default": 1 },
                "certify": { "type": "boolean", "default": true }
            }), &[]),
            "PhaseOptions": object(json!({
                "integrand": { "oneOf": [
                    { "const": "rta" },
                    object(json!({ "exact": object(json!({ "include_xy": { "type": "boolean" } }), &["include_xy"]) }), &["exact"])
                ]},
                "cyclic_threshold": { "type": "number", "default": 1.0 - 1e-6 },
                "analytic_intervals": { "type": "integer", "default": 4096 }
            }), &[]),
            "DesignPayload": {
                "type": "object",
                "properties": {
                    "target": { "$ref": "#/$defs/GateTarget" },
                    "cpg": object(json!({
                        "theta3": num(), "theta4": num(), "m": { "type": "integer" }, "n": { "type": "integer" }, "h1": num()
                    }), &["theta3", "theta4", "m", "n", "h1"]),
                    "aa": object(json!({ "m": { "type": "integer" }, "n": { "type": "integer" }, "h1": num(), "phase": num() }),
                        &["m", "n", "h1"]),
                    "tau_phi": { "type": "number", "exclusiveMinimum": 0 }
                },
                "oneOf": [{ "required": ["target"] }, { "required": ["cpg"] }, { "required": ["aa"] }],
                "additionalProperties": false
            },
            "SimulatePayload": object(simulate, &["propagator"]),
            "PhasesPayload": object(phases, &["propagator"]),
            "VerifyPayload": object(json!({
                "samples": { "type": "integer", "minimum": 1, "default": 8 },
                "h1": { "type": "number", "exclusiveMinimum": 0 },
                "fault": { "enum": ["flip-rotating-frame-sign"] }
            }), &[]),
            "SweepPayload": object(json!({
                "parameter": { "enum": ["h1", "h1_scale", "j", "steps_per_period"] },
                "values": { "type": "array", "items": num(), "minItems": 1 },
                "target": { "$ref": "#/$defs/GateTarget" },
                "include_xy": { "type": "boolean" },
                "compare_xy": { "type": "boolean" },
                "step_control": { "$ref": "#/$defs/StepControl" },
                "reference_steps_per_period": { "type": "integer", "minimum": 1 }
            }), &["parameter", "values", "target"]),
            "FeasibilityReport": {
                "type": "object",
                "properties": {
                    "omega_tau": quad(num()), "omega_tau_min": num(), "min_separation": num(), "max_coupling": num(),
                    "selectivity_ratio": num(), "separation_margin": num(), "amplitudes": quad(num()),
                    "amplitude_ratios": quad(num()), "eta": num(), "coherence_ratio": num(),
                    "feasible": { "type": "boolean" }, "reasons": { "type": "array", "items": { "type": "string" } }
                }
            },
            "DesignResult": {
                "type": "object",
                "properties": {
                    "target": { "$ref": "#/$defs/GateTarget" },
                    "pulse": { "$ref": "#/$defs/PulseSpec" },
                    "frame": { "$ref": "#/$defs/FrameParams" },
                    "predicted_gate": { "$ref": "#/$defs/GateMatrix" },
                    "global_sign": { "enum": [-1.0, 1.0] },
                    "feasibility": { "$ref": "#/$defs/FeasibilityReport" },
                    "notes": { "type": "array", "items": { "type": "string" } }
                },
                "required": ["target", "pulse", "frame", "predicted_gate", "global_sign", "feasibility"]
            },
            "Certificate": {
                "type": "object",
                "properties": {
                    "steps_per_period": { "type": "integer" }, "steps": { "type": "integer" },
                    "difference": { "type": ["number", "null"] }, "tolerance": num(), "norm_drift": num(),
                    "refinements": { "type": "integer" }
                }
            },
            "GateReport": {
                "type": "object",
                "properties": {
                    "propagator": { "type": "string" }, "tau": num(),
                    "gate": { "$ref": "#/$defs/GateMatrix" },
                    "diagonal_phases": quad(num()), "frame_phases": quad(num()),
                    "unitarity_defect": num(), "unitarity_tolerance": num(), "off_diagonal_mass": num(),
                    "certificate": { "$ref": "#/$defs/Certificate" },
                    "infidelity_vs_analytic": num(),
                    "xy_diagnostics": {
                        "type": "object",
                        "properties": {
                            "eta": num(), "eta_squared": num(), "infidelity_with_xy": num(),
                            "infidelity_without_xy": num(), "xy_shift": num(), "xy_shift_over_eta_squared": num()
                        }
                    }
                }
            },
            "PhaseReport": {
                "type": "object",
                "properties": {
                    "beta": quad(num()), "delta_D": quad(num()), "delta_G": quad(num()),
                    "global_sign": num(), "condition_met": { "type": "boolean" }, "aa_phase": num(),
                    "beta_unwrapped": quad(num()), "m": { "type": "integer" }, "n": { "type": "integer" },
                    "propagator": { "type": "string" }, "quadrature_error": quad(num()),
                    "imaginary_residue": quad(num()), "warnings": { "type": "array", "items": { "type": "string" } }
                }
            },
            "VerifyReport": {
                "type": "object",
                "properties": {
                    "seed": { "type": "integer" }, "samples": { "type": "integer" },
                    "fault": { "type": "string" }, "passed": { "type": "boolean" }, "failed": { "type": "integer" },
                    "invariants": { "type": "array", "items": {
                        "type": "object",
                        "properties": {
                            "name": { "type": "string" }, "passed": { "type": "boolean" },
                            "residual": { "type": ["number", "null"] }, "tolerance": { "type": ["number", "null"] },
                            "detail": { "type": "string" }
                        }
                    }}
                }
            }
        }
    })
}
