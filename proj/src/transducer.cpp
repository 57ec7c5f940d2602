#include "lt/transducer.hpp"

#include <cmath>

#include "lt/error.hpp"
#include "lt/log_math.hpp"

namespace lt {

namespace {

void check_input(const Tensor& joint, const TokenSeq& y, TokenId blank) {
  if (joint.rank() != 3) throw Error("joint tensor must be T x (U+1) x V");
  if (joint.dim(0) == 0) throw Error("empty input");
  if (joint.dim(1) != y.size() + 1) throw Error("joint tensor must be T x (U+1) x V");
  for (TokenId tok : y) {
    if (tok == blank) throw Error("blank inside label");
    if (tok < 0 || static_cast<std::size_t>(tok) >= joint.dim(2)) {
      throw Error("label token out of vocabulary");
    }
  }
}

}  // namespace

double transducer_forward(const Tensor& joint, const TokenSeq& y, TokenId blank) {
  check_input(joint, y, blank);
  const std::size_t frames = joint.dim(0);
  const std::size_t rows = joint.dim(1);  // U+1

  Tensor fwd({frames, rows}, kLogZero);
  fwd(0, 0) = 0.0;  // log 1
  for (std::size_t u = 1; u < rows; ++u) {
    fwd(0, u) = fwd(0, u - 1) + joint(0, u - 1, static_cast<std::size_t>(y[u - 1]));
  }
  for (std::size_t t = 1; t < frames; ++t) {
    fwd(t, 0) = fwd(t - 1, 0) + joint(t - 1, 0, static_cast<std::size_t>(blank));
    for (std::size_t u = 1; u < rows; ++u) {
      double stay = fwd(t - 1, u) + joint(t - 1, u, static_cast<std::size_t>(blank));
      double emit = fwd(t, u - 1) + joint(t, u - 1, static_cast<std::size_t>(y[u - 1]));
      fwd(t, u) = log_add(stay, emit);
    }
  }
  return -(fwd(frames - 1, rows - 1) +
           joint(frames - 1, rows - 1, static_cast<std::size_t>(blank)));
}

Tensor transducer_grad(const Tensor& joint, const TokenSeq& y, TokenId blank) {
  check_input(joint, y, blank);
  const std::size_t frames = joint.dim(0);
  const std::size_t rows = joint.dim(1);
  const std::size_t vocab = joint.dim(2);
  const std::size_t blank_idx = static_cast<std::size_t>(blank);

  Tensor fwd({frames, rows}, kLogZero);
  fwd(0, 0) = 0.0;
  for (std::size_t u = 1; u < rows; ++u) {
    fwd(0, u) = fwd(0, u - 1) + joint(0, u - 1, static_cast<std::size_t>(y[u - 1]));
  }
  for (std::size_t t = 1; t < frames; ++t) {
    fwd(t, 0) = fwd(t - 1, 0) + joint(t - 1, 0, blank_idx);
    for (std::size_t u = 1; u < rows; ++u) {
      fwd(t, u) = log_add(fwd(t - 1, u) + joint(t - 1, u, blank_idx),
                          fwd(t, u - 1) + joint(t, u - 1, static_cast<std::size_t>(y[u - 1])));
    }
  }

  // bwd(t, u): completion log-mass from node (t, u), including the edge
  // that leaves it. bwd(0, 0) is the total log-likelihood.
  Tensor bwd({frames, rows}, kLogZero);
  bwd(frames - 1, rows - 1) = joint(frames - 1, rows - 1, blank_idx);
  for (std::size_t u = rows - 1; u-- > 0;) {
    bwd(frames - 1, u) =
        bwd(frames - 1, u + 1) + joint(frames - 1, u, static_cast<std::size_t>(y[u]));
  }
  for (std::size_t t = frames - 1; t-- > 0;) {
    bwd(t, rows - 1) = bwd(t + 1, rows - 1) + joint(t, rows - 1, blank_idx);
    for (std::size_t u = rows - 1; u-- > 0;) {
      bwd(t, u) = log_add(bwd(t + 1, u) + joint(t, u, blank_idx),
                          bwd(t, u + 1) + joint(t, u, static_cast<std::size_t>(y[u])));
    }
  }

  const double log_z = bwd(0, 0);
  if (!std::isfinite(log_z)) throw Error("transducer mass underflowed; gradient undefined");

  // d loss / d joint(t,u,k) = -posterior mass of the edge leaving (t,u)
  // with symbol k; zero for symbols no edge carries.
  Tensor grad({frames, rows, vocab}, 0.0);
  for (std::size_t t = 0; t < frames; ++t) {
    for (std::size_t u = 0; u < rows; ++u) {
      double blank_tail;
      if (t + 1 < frames) {
        blank_tail = bwd(t + 1, u);
      } else {
        blank_tail = (u == rows - 1) ? 0.0 : kLogZero;  // terminal blank edge
      }
      double occ = fwd(t, u) + joint(t, u, blank_idx) + blank_tail - log_z;
      if (occ != kLogZero) grad(t, u, blank_idx) -= std::exp(occ);
      if (u + 1 < rows) {
        double emit_occ =
            fwd(t, u) + joint(t, u, static_cast<std::size_t>(y[u])) + bwd(t, u + 1) - log_z;
        if (emit_occ != kLogZero) {
          grad(t, u, static_cast<std::size_t>(y[u])) -= std::exp(emit_occ);
        }
      }
    }
  }
  return grad;
}

double brute_force_transducer(const Tensor& joint, const TokenSeq& y, TokenId blank) {
  check_input(joint, y, blank);
  const std::size_t frames = joint.dim(0);
  const std::size_t rows = joint.dim(1);
  const std::size_t blank_idx = static_cast<std::size_t>(blank);

  // binomial(T+U, U) path bound
  double count = 1.0;
  for (std::size_t i = 1; i <= y.size(); ++i) {
    count *= static_cast<double>(frames + i) / static_cast<double>(i);
  }
  if (count > 1e6) throw OracleLimitError("oracle limit");

  std::vector<double> paths;
  // Walk right (consume a frame, emit blank) or up (emit the next label).
  auto dfs = [&](auto&& self, std::size_t t, std::size_t u, double score) -> void {
    if (t == frames - 1 && u == rows - 1) {
      paths.push_back(score + joint(t, u, blank_idx));
      return;
    }
    if (t + 1 < frames) self(self, t + 1, u, score + joint(t, u, blank_idx));
    if (u + 1 < rows) {
      self(self, t, u + 1, score + joint(t, u, static_cast<std::size_t>(y[u])));
    }
  };
  dfs(dfs, 0, 0, 0.0);
  return -log_sum_exp(paths);
}

MemoryReport memory_footprint_report(std::uint64_t n, std::uint64_t t, std::uint64_t u,
                                     std::uint64_t v) {
  if (n == 0 || t == 0 || v == 0) throw Error("dimensions must be positive");
  MemoryReport report;
  report.full_activations = n * t * (u + 1) * v;
  report.frame_activations = n * t * v;
  report.ratio = u + 1;
  return report;
}

}  // namespace lt
