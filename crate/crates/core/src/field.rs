use serde::{Deserialize, Serialize};

use crate::error::{ModelError, Result};
use crate::lattice::{Lattice, Velocity};

/// Joint configuration of the hidden fields: velocities and segmentation bits
/// per site, line bits per undirected edge.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldState {
    pub d: Vec<Velocity>,
    pub s: Vec<u8>,
    pub l: Vec<u8>,
}

impl FieldState {
    pub fn zeros(lattice: &Lattice) -> Self {
        FieldState {
            d: vec![Velocity::ZERO; lattice.num_sites()],
            s: vec![0; lattice.num_sites()],
            l: vec![0; lattice.num_edges()],
        }
    }

    /// Checks dimensions, bit ranges, and that every velocity lies in the
    /// site's support.
    pub fn validate(&self, lattice: &Lattice) -> Result<()> {
        let n = lattice.num_sites();
        if self.d.len() != n || self.s.len() != n {
            return Err(ModelError::shape(
                format!("{n} sites"),
                format!("{} velocities, {} segmentation bits", self.d.len(), self.s.len()),
            ));
        }
        if self.l.len() != lattice.num_edges() {
            return Err(ModelError::shape(
                format!("{} edges", lattice.num_edges()),
                format!("{} line bits", self.l.len()),
            ));
        }
        if let Some(i) = self.s.iter().position(|&b| b > 1) {
            return Err(ModelError::Domain(format!("s[{i}] = {} is not a bit", self.s[i])));
        }
        if let Some(e) = self.l.iter().position(|&b| b > 1) {
            return Err(ModelError::Domain(format!("l[{e}] = {} is not a bit", self.l[e])));
        }
        for (i, &d) in self.d.iter().enumerate() {
            if !lattice.support(i).contains(d) {
                return Err(ModelError::Domain(format!(
                    "velocity ({}, {}) at site {i} is outside its support",
                    d.vx, d.vy
                )));
            }
        }
        Ok(())
    }
}

/// Read access to a (possibly real-valued) field configuration. Binary fields
/// report 0.0/1.0; mean-field states report expectations.
pub trait FieldView {
    fn s(&self, site: usize) -> f64;
    fn d(&self, site: usize) -> [f64; 2];
    /// Integer displacement used to address the previous frame.
    fn offset(&self, site: usize) -> Velocity;
    fn l(&self, edge: usize) -> f64;
}

impl FieldView for FieldState {
    fn s(&self, site: usize) -> f64 {
        f64::from(self.s[site])
    }

    fn d(&self, site: usize) -> [f64; 2] {
        self.d[site].as_f64()
    }

    fn offset(&self, site: usize) -> Velocity {
        self.d[site]
    }

    fn l(&self, edge: usize) -> f64 {
        f64::from(self.l[edge])
    }
}

impl<V: FieldView + ?Sized> FieldView for &V {
    fn s(&self, site: usize) -> f64 {
        (**self).s(site)
    }
    fn d(&self, site: usize) -> [f64; 2] {
        (**self).d(site)
    }
    fn offset(&self, site: usize) -> Velocity {
        (**self).offset(site)
    }
    fn l(&self, edge: usize) -> f64 {
        (**self).l(edge)
    }
}

/// A view with a handful of variables replaced.
#[derive(Clone, Debug)]
pub struct Overlay<'a, V: ?Sized> {
    base: &'a V,
    s: Vec<(usize, f64)>,
    d: Vec<(usize, Velocity)>,
    l: Vec<(usize, f64)>,
}

impl<'a, V: FieldView + ?Sized> Overlay<'a, V> {
    pub fn new(base: &'a V) -> Self {
        Overlay {
            base,
            s: Vec::new(),
            d: Vec::new(),
            l: Vec::new(),
        }
    }

    pub fn with_s(mut self, site: usize, value: f64) -> Self {
        self.set_s(site, value);
        self
    }

    pub fn with_d(mut self, site: usize, value: Velocity) -> Self {
        self.set_d(site, value);
        self
    }

    pub fn with_l(mut self, edge: usize, value: f64) -> Self {
        self.set_l(edge, value);
        self
    }

    pub fn set_s(&mut self, site: usize, value: f64) {
        upsert(&mut self.s, site, value);
    }

    pub fn set_d(&mut self, site: usize, value: Velocity) {
        upsert(&mut self.d, site, value);
    }

    pub fn set_l(&mut self, edge: usize, value: f64) {
        upsert(&mut self.l, edge, value);
    }
}

fn upsert<T>(slot: &mut Vec<(usize, T)>, key: usize, value: T) {
    match slot.iter_mut().find(|(k, _)| *k == key) {
        Some(entry) => entry.1 = value,
        None => slot.push((key, value)),
    }
}

fn lookup<T: Copy>(slot: &[(usize, T)], key: usize) -> Option<T> {
    slot.iter().find(|(k, _)| *k == key).map(|(_, v)| *v)
}

impl<V: FieldView + ?Sized> FieldView for Overlay<'_, V> {
    fn s(&self, site: usize) -> f64 {
        lookup(&self.s, site).unwrap_or_else(|| self.base.s(site))
    }

    fn d(&self, site: usize) -> [f64; 2] {
        lookup(&self.d, site).map_or_else(|| self.base.d(site), Velocity::as_f64)
    }

    fn offset(&self, site: usize) -> Velocity {
        lookup(&self.d, site).unwrap_or_else(|| self.base.offset(site))
    }

    fn l(&self, edge: usize) -> f64 {
        lookup(&self.l, edge).unwrap_or_else(|| self.base.l(edge))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn validate_rejects_out_of_support_velocity() {
        let lat = Lattice::with_max_speed(3, 3, 1).unwrap();
        let mut f = FieldState::zeros(&lat);
        assert!(f.validate(&lat).is_ok());
        // site 0 cannot take its source from x = -1
        f.d[0] = Velocity::new(1, 0);
        assert!(matches!(f.validate(&lat), Err(ModelError::Domain(_))));
    }

    #[test]
    fn validate_rejects_bad_shapes_and_bits() {
        let lat = Lattice::new(2, 2).unwrap();
        let mut f = FieldState::zeros(&lat);
        f.l.pop();
        assert!(matches!(f.validate(&lat), Err(ModelError::Shape { .. })));
        let mut f = FieldState::zeros(&lat);
        f.s[1] = 2;
        assert!(matches!(f.validate(&lat), Err(ModelError::Domain(_))));
    }

    #[test]
    fn overlay_overrides_only_named_variables() {
        let lat = Lattice::new(2, 2).unwrap();
        let f = FieldState::zeros(&lat);
        let o = Overlay::new(&f).with_s(1, 1.0).with_d(2, Velocity::new(-1, 0)).with_l(0, 1.0);
        assert_eq!(o.s(1), 1.0);
        assert_eq!(o.s(0), 0.0);
        assert_eq!(o.offset(2), Velocity::new(-1, 0));
        assert_eq!(o.d(3), [0.0, 0.0]);
        assert_eq!(o.l(0), 1.0);
        assert_eq!(o.l(1), 0.0);
    }
}
