#pragma once

#include <memory>
#include <ostream>
#include <stdexcept>
#include <vector>

#include "evtes/grid.hpp"
#include "evtes/slab.hpp"

namespace evtes {

class ModeSolverError : public std::runtime_error {
 public:
  ModeSolverError(const std::string& what, int restarts = 0, double residual = 0.0)
      : std::runtime_error(what), restarts_(restarts), residual_(residual) {}
  int restarts() const { return restarts_; }
  double residual() const { return residual_; }

 private:
  int restarts_;
  double residual_;
};

/// Semivectorial mode: TE-like carries E_x, TM-like carries H_x.
struct Mode2D {
  cplx n_eff;
  Polarization polarization = Polarization::TE;
  std::shared_ptr<const Grid2D> grid;
  std::vector<cplx> field;    // principal component at the cell centers
  std::vector<double> weight; // local power-flux factor per cell
  bool power_normalized = false;
  double eigen_residual = 0.0;

  /// Energy share of the labeled component; 1 in the semivectorial model.
  double principal_fraction() const { return 1.0; }
  /// sum |field|^2 weight dA over real cell areas.
  double power() const;
  double alpha_cm() const;
};

struct ModeSolveOptions {
  int krylov_dim = 24;
  int max_restarts = 30;
  double tol = 1e-11;
};

/// Eigenpairs of the semivectorial operator nearest `n_guess`, sorted by
/// |n_eff - n_guess|.
std::vector<Mode2D> solve_modes_2d(const CrossSection& cs, std::shared_ptr<const Grid2D> grid, Polarization pol,
                                   cplx n_guess, int count, const ModeSolveOptions& opt = {});

/// Guess at the highest core index.
cplx default_guess(const CrossSection& cs);

/// Highest-index mode concentrated on the channel (searches a few candidates
/// around the default guess).
Mode2D fundamental_mode(const CrossSection& cs, std::shared_ptr<const Grid2D> grid, Polarization pol,
                        const ModeSolveOptions& opt = {});

/// Power-normalized overlap sum conj(a) b sqrt(w_a w_b) dA. Both modes must
/// live on the same grid.
cplx overlap(const Mode2D& a, const Mode2D& b);

/// Two cascaded slab solves: vertical stacks per lateral strip, then a
/// lateral slab of the resulting effective indices.
cplx effective_index_method(const CrossSection& cs, Polarization pol, double strip_um = 0.25);

/// CSV with columns x_um,y_um,re,im.
void write_field_csv(std::ostream& out, const Mode2D& m);

}  // namespace evtes
