use crate::error::{Error, Result};
use crate::nn::{LayerSpec, Network};

/// Copies the teacher's parameters into `student`.
///
/// With `readout = None` every layer is copied and the architectures must
/// agree layer by layer. With `readout = Some(spec)`, the student's last
/// parameterized layer must be `spec`; it keeps the student's own (fresh)
/// initialization and every earlier layer is copied.
pub fn finetune_init(student: &Network, teacher: &Network, readout: Option<&LayerSpec>) -> Result<Network> {
    let s_layers = student.layers();
    let t_layers = teacher.layers();
    if s_layers.len() != t_layers.len() {
        return Err(Error::shape(format!(
            "student has {} layers, teacher {}",
            s_layers.len(),
            t_layers.len()
        )));
    }
    let keep = match readout {
        None => None,
        Some(spec) => {
            let last = s_layers
                .iter()
                .rposition(|l| l.spec().has_params())
                .ok_or_else(|| Error::invalid("student has no parameterized layer"))?;
            if s_layers[last].spec() != spec {
                return Err(Error::invalid(format!(
                    "readout replacement {:?} does not match the student's final layer {:?}",
                    spec,
                    s_layers[last].spec()
                )));
            }
            Some(last)
        }
    };
    let mut out = student.clone();
    for (i, (dst, src)) in out.layers_mut().iter_mut().zip(t_layers).enumerate() {
        if Some(i) == keep {
            continue;
        }
        if dst.spec != src.spec || (dst.spec.has_params() && dst.in_shape != src.in_shape) {
            return Err(Error::shape(format!(
                "layer {}: student {:?} on {:?} vs teacher {:?} on {:?}",
                i, dst.spec, dst.in_shape, src.spec, src.in_shape
            )));
        }
        dst.params.clone_from(&src.params);
    }
    Ok(out)
}
