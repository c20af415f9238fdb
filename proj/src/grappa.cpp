#include "tmra/grappa.hpp"

#include <fstream>

#include <nlohmann/json.hpp>

#include "tmra/errors.hpp"

namespace tmra {

using json = nlohmann::json;

AcsRegion acs_region(const SamplingSchedule& sched) {
  AcsRegion r;
  r.y0 = sched.height / 2 - sched.acs_half;
  r.y1 = sched.height / 2 + sched.acs_half;
  r.x0 = sched.width / 2 - sched.acs_half;
  r.x1 = sched.width / 2 + sched.acs_half;
  return r;
}

SamplingMask GrappaKernel::expected_mask() const {
  SamplingMask m(grid_h, grid_w);
  for (int y = 0; y < grid_h; ++y)
    for (int x = 0; x < grid_w; ++x) {
      const bool in_acs = y >= acs.y0 && y < acs.y1 && x >= acs.x0 && x < acs.x1;
      const bool on_lat = y % lattice_ry == phase_y && x % lattice_rz == phase_z;
      if (in_acs || on_lat) m.set(y, x, true);
    }
  m.vs = 0;
  m.update_acceleration();
  return m;
}

namespace {

// Source stencil for a missing point at lattice-cell offset (dy, dz): the
// kh x kw block of sampled lattice points around its base lattice point.
struct Stencil {
  std::vector<std::pair<int, int>> offsets;  // relative to the missing point
};

Stencil make_stencil(int dy, int dz, int ry, int rz, int kh, int kw) {
  Stencil st;
  st.offsets.reserve(static_cast<size_t>(kh) * kw);
  for (int p = 0; p < kh; ++p)
    for (int q = 0; q < kw; ++q)
      st.offsets.emplace_back((p - kh / 2) * ry - dy, (q - kw / 2) * rz - dz);
  return st;
}

}  // namespace

GrappaKernel calibrate(const KSpaceFrame& acs_frame, const AcsRegion& acs, int lattice_ry,
                       int lattice_rz, int kernel_h, int kernel_w, double lambda_rel) {
  if (lattice_ry < 1 || lattice_rz < 1) throw parameter_error("calibrate: bad lattice");
  if (kernel_h < 1 || kernel_w < 1) throw parameter_error("calibrate: bad kernel size");
  if (lambda_rel < 0) throw parameter_error("calibrate: lambda must be >= 0");
  if (acs.rows() < 1 || acs.cols() < 1 || acs.y0 < 0 || acs.x0 < 0 ||
      acs.y1 > acs_frame.height || acs.x1 > acs_frame.width)
    throw calibration_error("calibrate: ACS region out of bounds");

  GrappaKernel k;
  k.coils = acs_frame.coils;
  k.kernel_h = kernel_h;
  k.kernel_w = kernel_w;
  k.lattice_ry = lattice_ry;
  k.lattice_rz = lattice_rz;
  k.phase_y = (acs_frame.height / 2) % lattice_ry;
  k.phase_z = (acs_frame.width / 2) % lattice_rz;
  k.grid_h = acs_frame.height;
  k.grid_w = acs_frame.width;
  k.acs = acs;
  k.lambda_rel = lambda_rel;

  const int C = acs_frame.coils;
  const int taps = C * kernel_h * kernel_w;
  const size_t plane = static_cast<size_t>(acs_frame.height) * acs_frame.width;

  for (int dy = 0; dy < lattice_ry; ++dy) {
    for (int dz = 0; dz < lattice_rz; ++dz) {
      if (dy == 0 && dz == 0) continue;
      const Stencil st = make_stencil(dy, dz, lattice_ry, lattice_rz, kernel_h, kernel_w);

      // Collect every target position inside the ACS whose class matches
      // (dy, dz) and whose full source stencil stays inside the ACS.
      std::vector<std::pair<int, int>> targets;
      for (int y = acs.y0; y < acs.y1; ++y) {
        if (((y - k.phase_y) % lattice_ry + lattice_ry) % lattice_ry != dy) continue;
        for (int x = acs.x0; x < acs.x1; ++x) {
          if (((x - k.phase_z) % lattice_rz + lattice_rz) % lattice_rz != dz) continue;
          bool inside = true;
          for (const auto& [oy, ox] : st.offsets) {
            const int sy = y + oy, sx = x + ox;
            if (sy < acs.y0 || sy >= acs.y1 || sx < acs.x0 || sx >= acs.x1) {
              inside = false;
              break;
            }
          }
          if (inside) targets.emplace_back(y, x);
        }
      }
      if (targets.empty())
        throw calibration_error("calibrate: ACS too small for the kernel footprint");

      Eigen::MatrixXcd A(targets.size(), taps);
      Eigen::MatrixXcd B(targets.size(), C);
      for (size_t r = 0; r < targets.size(); ++r) {
        const auto [y, x] = targets[r];
        int col = 0;
        for (int c = 0; c < C; ++c)
          for (const auto& [oy, ox] : st.offsets)
            A(r, col++) = acs_frame.data[c * plane + (y + oy) * acs_frame.width + (x + ox)];
        for (int c = 0; c < C; ++c)
          B(r, c) = acs_frame.data[c * plane + static_cast<size_t>(y) * acs_frame.width + x];
      }

      Eigen::MatrixXcd normal = A.adjoint() * A;
      const double mean_diag = normal.diagonal().real().mean();
      if (lambda_rel > 0) {
        normal.diagonal().array() += lambda_rel * mean_diag;
      } else {
        // surface singularity instead of regularizing
        Eigen::JacobiSVD<Eigen::MatrixXcd> svd(normal);
        const auto& sv = svd.singularValues();
        if (sv(0) <= 0 || sv(sv.size() - 1) / sv(0) < 1e-12)
          throw numeric_error("calibrate: singular normal matrix with lambda = 0");
      }
      Eigen::LDLT<Eigen::MatrixXcd> solver(normal);
      if (solver.info() != Eigen::Success)
        throw numeric_error("calibrate: normal equations factorization failed");
      k.weights.push_back(solver.solve(A.adjoint() * B));
    }
  }
  return k;
}

KSpaceFrame interpolate(const KSpaceFrame& undersampled, const GrappaKernel& kernel) {
  if (undersampled.coils != kernel.coils || undersampled.height != kernel.grid_h ||
      undersampled.width != kernel.grid_w)
    throw contract_error("interpolate: frame/kernel shape mismatch");
  if (!undersampled.mask.same_pattern(kernel.expected_mask()))
    throw contract_error("interpolate: mask does not match the kernel's lattice+ACS pattern");

  const int C = kernel.coils, H = kernel.grid_h, W = kernel.grid_w;
  const size_t plane = static_cast<size_t>(H) * W;
  KSpaceFrame out = undersampled;  // acquired samples pass through
  out.mask = full_mask(H, W);

  std::vector<Stencil> stencils;
  for (int dy = 0; dy < kernel.lattice_ry; ++dy)
    for (int dz = 0; dz < kernel.lattice_rz; ++dz)
      if (dy != 0 || dz != 0)
        stencils.push_back(
            make_stencil(dy, dz, kernel.lattice_ry, kernel.lattice_rz, kernel.kernel_h,
                         kernel.kernel_w));

  Eigen::RowVectorXcd src(C * kernel.kernel_h * kernel.kernel_w);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      if (undersampled.mask.at(y, x)) continue;
      const int dy = ((y - kernel.phase_y) % kernel.lattice_ry + kernel.lattice_ry) %
                     kernel.lattice_ry;
      const int dz = ((x - kernel.phase_z) % kernel.lattice_rz + kernel.lattice_rz) %
                     kernel.lattice_rz;
      const int cls = dy * kernel.lattice_rz + dz - 1;
      const Stencil& st = stencils[cls];
      int col = 0;
      for (int c = 0; c < C; ++c) {
        for (const auto& [oy, ox] : st.offsets) {
          const int sy = y + oy, sx = x + ox;
          src(col++) = (sy >= 0 && sy < H && sx >= 0 && sx < W)
                           ? undersampled.data[c * plane + static_cast<size_t>(sy) * W + sx]
                           : cplx(0.0, 0.0);
        }
      }
      const Eigen::RowVectorXcd filled = src * kernel.weights[cls];
      for (int c = 0; c < C; ++c) out.data[c * plane + static_cast<size_t>(y) * W + x] = filled(c);
    }
  }
  return out;
}

MultiCoilImage grappa_reconstruct(const std::vector<KSpaceFrame>& frames,
                                  const SamplingSchedule& sched, int target_frame,
                                  double lambda_rel) {
  KSpaceFrame combined = view_share_combine(frames, sched, target_frame, sched.b_interleaves);
  if (!combined.mask.same_pattern(lattice_acs_mask(sched)))
    throw contract_error("grappa_reconstruct: combined mask is not the lattice+ACS pattern");
  const GrappaKernel kernel = calibrate(combined, acs_region(sched), sched.lattice_ry,
                                        sched.lattice_rz, 5, 5, lambda_rel);
  const KSpaceFrame filled = interpolate(combined, kernel);
  MultiCoilImage img = inverse_fft(filled);
  img.frame_index = target_frame;
  img.role = ImageRole::ground_truth;  // domain-X material
  return img;
}

void save_kernel(const GrappaKernel& k, const std::string& path) {
  json j;
  j["coils"] = k.coils;
  j["kernel"] = {k.kernel_h, k.kernel_w};
  j["lattice"] = {k.lattice_ry, k.lattice_rz};
  j["phase"] = {k.phase_y, k.phase_z};
  j["grid"] = {k.grid_h, k.grid_w};
  j["acs"] = {k.acs.y0, k.acs.y1, k.acs.x0, k.acs.x1};
  j["lambda_rel"] = k.lambda_rel;
  json ws = json::array();
  for (const auto& W : k.weights) {
    json w;
    w["rows"] = W.rows();
    w["cols"] = W.cols();
    json vals = json::array();
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c)
        vals.push_back({W(r, c).real(), W(r, c).imag()});
    w["values"] = std::move(vals);
    ws.push_back(std::move(w));
  }
  j["weights"] = std::move(ws);
  std::ofstream f(path);
  if (!f) throw io_error("save_kernel: cannot open " + path);
  f << j.dump(2);
}

GrappaKernel load_kernel(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw io_error("load_kernel: cannot open " + path);
  json j = json::parse(f);
  GrappaKernel k;
  k.coils = j.at("coils");
  k.kernel_h = j.at("kernel")[0];
  k.kernel_w = j.at("kernel")[1];
  k.lattice_ry = j.at("lattice")[0];
  k.lattice_rz = j.at("lattice")[1];
  k.phase_y = j.at("phase")[0];
  k.phase_z = j.at("phase")[1];
  k.grid_h = j.at("grid")[0];
  k.grid_w = j.at("grid")[1];
  k.acs = {j.at("acs")[0], j.at("acs")[1], j.at("acs")[2], j.at("acs")[3]};
  k.lambda_rel = j.at("lambda_rel");
  for (const auto& w : j.at("weights")) {
    Eigen::MatrixXcd W(w.at("rows").get<int>(), w.at("cols").get<int>());
    const auto& vals = w.at("values");
    size_t i = 0;
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c, ++i)
        W(r, c) = cplx(vals[i][0].get<double>(), vals[i][1].get<double>());
    k.weights.push_back(std::move(W));
  }
  return k;
}

}  // namespace tmra
