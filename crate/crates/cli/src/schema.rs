//! Lightweight schema validators each JSON-emitting command round-trips its
//! output through before writing.

use serde_json::Value;

fn require_number(v: &Value, key: &str) -> Result<(), String> {
    match v.get(key) {
        Some(Value::Number(_)) => Ok(()),
        Some(other) => Err(format!("'{key}' must be a number, got {other}")),
        None => Err(format!("missing key '{key}'")),
    }
}

fn require_bool(v: &Value, key: &str) -> Result<(), String> {
    match v.get(key) {
        Some(Value::Bool(_)) => Ok(()),
        _ => Err(format!("missing boolean '{key}'")),
    }
}

fn require_string(v: &Value, key: &str) -> Result<(), String> {
    match v.get(key) {
        Some(Value::String(_)) => Ok(()),
        _ => Err(format!("missing string '{key}'")),
    }
}

fn require_number_array(v: &Value, key: &str) -> Result<(), String> {
    match v.get(key) {
        Some(Value::Array(a)) if a.iter().all(Value::is_number) => Ok(()),
        _ => Err(format!("missing numeric array '{key}'")),
    }
}

fn validate_phase_point(v: &Value) -> Result<(), String> {
    for key in [
        "t", "r", "theta", "phi", "xi_t", "xi_r", "xi_theta", "xi_phi",
    ] {
        require_number(v, key)?;
    }
    Ok(())
}

fn validate_datum(v: &Value) -> Result<(), String> {
    for key in ["xi_t", "xi_phi", "r_crit", "f_at_crit"] {
        require_number(v, key)?;
    }
    validate_phase_point(v.get("point").ok_or("missing 'point'")?)
}

pub fn validate_subextremal(v: &Value) -> Result<(), String> {
    require_bool(v, "is_subextremal")?;
    require_number_array(v, "roots")?;
    require_bool(v, "abs_spin_below_mass")?;
    for key in ["r_e", "r_c_horizon"] {
        match v.get(key) {
            Some(Value::Null) | Some(Value::Number(_)) => {}
            _ => return Err(format!("'{key}' must be a number or null")),
        }
    }
    Ok(())
}

pub fn validate_trapped_set(v: &Value) -> Result<(), String> {
    require_number(v, "skipped")?;
    require_number(v, "drawn")?;
    let Some(Value::Array(data)) = v.get("data") else {
        return Err("missing array 'data'".into());
    };
    data.iter().try_for_each(validate_datum)
}

pub fn validate_rates(v: &Value) -> Result<(), String> {
    require_number(v, "nu_min")?;
    require_number(v, "nu_max")?;
    require_string(v, "grid_spec")?;
    validate_datum(v.get("argmin").ok_or("missing 'argmin'")?)?;
    validate_datum(v.get("argmax").ok_or("missing 'argmax'")?)
}

fn validate_bracket_report(v: &Value) -> Result<(), String> {
    validate_phase_point(v.get("point").ok_or("missing 'point'")?)?;
    require_number(v, "max_residual")?;
    require_string(v, "mode")?;
    let Some(Value::Array(rows)) = v.get("residual_matrix") else {
        return Err("missing array 'residual_matrix'".into());
    };
    if rows.len() != 8 {
        return Err(format!("residual_matrix needs 8 rows, got {}", rows.len()));
    }
    for row in rows {
        let Value::Array(cells) = row else {
            return Err("residual_matrix rows must be arrays".into());
        };
        if cells.len() != 8 || !cells.iter().all(Value::is_number) {
            return Err("residual_matrix rows need 8 numbers".into());
        }
    }
    Ok(())
}

pub fn validate_normal_form(v: &Value) -> Result<(), String> {
    require_number(v, "max_residual")?;
    require_string(v, "mode")?;
    let Some(Value::Array(reports)) = v.get("reports") else {
        return Err("missing array 'reports'".into());
    };
    reports.iter().try_for_each(validate_bracket_report)
}

pub fn validate_symbol_order(v: &Value) -> Result<(), String> {
    require_number(v, "m_est")?;
    require_number(v, "m_tilde_est")?;
    require_number(v, "fit_residual")?;
    require_string(v, "grid_spec")
}
