//! Kernel texts used by the simulation and analysis modules and their tests.

/// Lennard-Jones force and energy. Constants: `sigma2`, `rc_sq`, `CV`, `CF`.
/// Bindings: `r` (READ), `F` (INC or INC_ZERO), `u` (INC global).
pub const LJ_KERNEL: &str = r"
const double dr0 = r.i[0] - r.j[0];
const double dr1 = r.i[1] - r.j[1];
const double dr2 = r.i[2] - r.j[2];
// Calculate squared distance
// dr2 = |r_i - r_j|^2
double dr_sq = dr0*dr0+dr1*dr1+dr2*dr2;
// (sigma/dr)^2
const double r_m2 = sigma2/dr_sq;
// (sigma/dr)^4
const double r_m4 = r_m2*r_m2;
// (sigma/dr)^6
const double r_m6 = r_m4*r_m2;
// (sigma/dr)^8
const double r_m8 = r_m4*r_m4;
// Increment potential energy
u[0]+= (dr_sq<rc_sq) ? CV*((r_m6-1.0)*r_m6+0.25) : 0.0;
const double f_tmp=CF*(r_m6-0.5)*r_m8;
// Increment forces
F.i[0]+= (dr_sq<rc_sq)?f_tmp*dr0:0.0;
F.i[1]+= (dr_sq<rc_sq)?f_tmp*dr1:0.0;
F.i[2]+= (dr_sq<rc_sq)?f_tmp*dr2:0.0;
";

/// `b.i[0] += |a_i - a_j|^2` and `S += |a_i - a_j|^4` over all pairs.
/// Constant: `dimension`. Bindings: `a` (READ), `b` (INC), `S` (INC global).
pub const PAIR_SQUARES_KERNEL: &str = r"
  double da_sq = 0.0;
  for (int r=0;r<dimension;++r) {
    double da = a.i[r]-a.j[r];
    da_sq += da*da;
  }
  b.i[0] += da_sq;
  S += da_sq*da_sq;
";

/// First velocity-Verlet half step. Constants: `dt`, `dht_iMASS`.
/// Bindings: `v` (RW), `r` (INC), `F` (READ).
pub const VV_FIRST_HALF_KERNEL: &str = r"
v.i[0] += F.i[0]*dht_iMASS;
v.i[1] += F.i[1]*dht_iMASS;
v.i[2] += F.i[2]*dht_iMASS;
r.i[0] += dt*v.i[0];
r.i[1] += dt*v.i[1];
r.i[2] += dt*v.i[2];
";

/// Second velocity-Verlet half step. Constant: `dht_iMASS`.
/// Bindings: `v` (INC), `F` (READ).
pub const VV_SECOND_HALF_KERNEL: &str = r"
v.i[0] += F.i[0]*dht_iMASS;
v.i[1] += F.i[1]*dht_iMASS;
v.i[2] += F.i[2]*dht_iMASS;
";

/// Direct bonds for common-neighbour analysis. Constant: `rc_sq`.
/// Bindings: `r`, `id` (READ), `bond` (WRITE), `n_nb` (INC_ZERO),
/// `n_bond` (RW, zeroed beforehand).
pub const CNA_DIRECT_KERNEL: &str = r"
// Calculate squared distance
const double dr0 = r.i[0] - r.j[0];
const double dr1 = r.i[1] - r.j[1];
const double dr2 = r.i[2] - r.j[2];
double dr_sq = dr0*dr0+dr1*dr1+dr2*dr2;
if (dr_sq < rc_sq) {
  // Add direct bond
  bond.i[2*n_bond.i[0]] = id.i[0];
  bond.i[2*n_bond.i[0]+1] = id.j[0];
  // Increment number of neighbours
  n_nb.i[0]++;
  // Increment number of bonds
  n_bond.i[0]++;
}
";

/// Environment bonds for common-neighbour analysis. Constant: `rc_sq`.
/// Bindings: `r`, `id`, `n_nb` (READ), `bond` (RW), `n_bond` (RW).
pub const CNA_ENVIRONMENT_KERNEL: &str = r"
// Calculate squared distance
const double dr0 = r.i[0] - r.j[0];
const double dr1 = r.i[1] - r.j[1];
const double dr2 = r.i[2] - r.j[2];
double dr_sq = dr0*dr0+dr1*dr1+dr2*dr2;
if (dr_sq < rc_sq) {
  for (int k=0;k<n_nb.j[0];++k) {
    // Add indirect bond
    if (bond.j[2*k+1] != id.i[0]) {
      bond.i[2*n_bond.i[0]] = bond.j[2*k];
      bond.i[2*n_bond.i[0]+1] = bond.j[2*k+1];
      // Increment number of bonds
      n_bond.i[0]++;
    }
  }
}
";
