#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "edgecache/common.hpp"

namespace edgecache {

// File ids run 1..F; id 0 is the idle request with zero length.
struct FileCatalog {
  std::vector<double> lengths;     // Mnats, lengths[j - 1] for file j
  std::vector<double> popularity;  // optional; empty when unknown

  std::size_t num_files() const noexcept { return lengths.size(); }

  double length(int file) const {
    if (file == 0) return 0.0;
    return lengths.at(static_cast<std::size_t>(file - 1));
  }

  void validate() const {
    for (double l : lengths) {
      if (!std::isfinite(l) || l < 0.0) throw std::invalid_argument("catalog: lengths must be finite and >= 0");
    }
    if (popularity.empty()) return;
    if (popularity.size() != lengths.size()) {
      throw std::invalid_argument("catalog: popularity and lengths differ in size");
    }
    double sum = 0.0;
    for (double p : popularity) {
      if (!(p >= 0.0)) throw std::invalid_argument("catalog: negative popularity");
      sum += p;
    }
    if (std::abs(sum - 1.0) > 1e-12 * static_cast<double>(popularity.size()) + 1e-12) {
      throw std::invalid_argument("catalog: popularity does not sum to 1");
    }
  }

  friend bool operator==(const FileCatalog&, const FileCatalog&) = default;
};

struct DemandTrace {
  std::size_t num_slots = 0;
  std::size_t num_users = 0;
  double slot_seconds = 1.0;
  Grid<int> requests;  // (slot, user) -> file id, 0 = idle
  FileCatalog catalog;

  void validate() const {
    if (num_slots == 0 || num_users == 0) throw std::invalid_argument("trace: empty dimensions");
    if (!(slot_seconds > 0.0) || !std::isfinite(slot_seconds)) {
      throw std::invalid_argument("trace: slot_seconds must be positive");
    }
    if (requests.rows() != num_slots || requests.cols() != num_users) {
      throw std::invalid_argument("trace: request matrix has wrong shape");
    }
    const int max_id = static_cast<int>(catalog.num_files());
    for (int id : requests.data()) {
      if (id < 0 || id > max_id) throw std::invalid_argument("trace: request id outside catalog");
    }
    catalog.validate();
  }

  friend bool operator==(const DemandTrace&, const DemandTrace&) = default;
};

// theta_j = j^-gamma / sum_q q^-gamma
inline std::vector<double> zipf_popularity(std::size_t num_files, double gamma) {
  if (num_files == 0) throw std::invalid_argument("zipf_popularity: num_files must be >= 1");
  if (!std::isfinite(gamma)) throw std::invalid_argument("zipf_popularity: gamma must be finite");
  std::vector<double> theta(num_files);
  for (std::size_t j = 0; j < num_files; ++j) theta[j] = std::pow(static_cast<double>(j + 1), -gamma);
  // Sum smallest terms first.
  double total = 0.0;
  for (std::size_t j = num_files; j-- > 0;) total += theta[j];
  for (double& t : theta) t /= total;
  return theta;
}

// Catalog with i.i.d. uniform lengths and Zipf popularity.
inline FileCatalog make_catalog(std::size_t num_files, double min_length, double max_length, double gamma,
                                Rng& rng) {
  if (!(min_length >= 0.0) || !(max_length >= min_length)) {
    throw std::invalid_argument("make_catalog: bad length range");
  }
  FileCatalog cat;
  cat.lengths.resize(num_files);
  for (double& l : cat.lengths) l = rng.uniform(min_length, max_length);
  cat.popularity = zipf_popularity(num_files, gamma);
  return cat;
}

inline DemandTrace sample_trace(const FileCatalog& catalog, std::size_t num_slots, std::size_t num_users,
                                std::uint64_t seed, double idle_probability, double slot_seconds = 10.0) {
  if (!(idle_probability >= 0.0 && idle_probability <= 1.0)) {
    throw std::invalid_argument("sample_trace: idle_probability must lie in [0, 1]");
  }
  if (catalog.popularity.size() != catalog.num_files() || catalog.num_files() == 0) {
    throw std::invalid_argument("sample_trace: catalog needs a popularity vector");
  }
  catalog.validate();

  std::vector<double> cdf(catalog.num_files());
  std::partial_sum(catalog.popularity.begin(), catalog.popularity.end(), cdf.begin());

  DemandTrace trace;
  trace.num_slots = num_slots;
  trace.num_users = num_users;
  trace.slot_seconds = slot_seconds;
  trace.catalog = catalog;
  trace.requests = Grid<int>(num_slots, num_users, 0);

  Rng rng(seed);
  for (std::size_t n = 0; n < num_slots; ++n) {
    for (std::size_t u = 0; u < num_users; ++u) {
      const double idle_draw = rng.uniform();
      const double file_draw = rng.uniform() * cdf.back();
      if (idle_draw < idle_probability) continue;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), file_draw);
      if (it == cdf.end()) --it;
      trace.requests(n, u) = static_cast<int>(it - cdf.begin()) + 1;
    }
  }
  trace.validate();
  return trace;
}

// Refines every slot into `factor` sub-slots. File j becomes `factor` pieces
// of length l_j / factor, piece p being requested in sub-slot p of the slot.
inline DemandTrace split_slots(const DemandTrace& trace, std::size_t factor) {
  if (factor == 0) throw std::invalid_argument("split_slots: factor must be >= 1");
  DemandTrace out;
  out.num_slots = trace.num_slots * factor;
  out.num_users = trace.num_users;
  out.slot_seconds = trace.slot_seconds / static_cast<double>(factor);
  const std::size_t F = trace.catalog.num_files();
  out.catalog.lengths.resize(F * factor);
  for (std::size_t j = 0; j < F; ++j) {
    for (std::size_t p = 0; p < factor; ++p) {
      out.catalog.lengths[j * factor + p] = trace.catalog.lengths[j] / static_cast<double>(factor);
    }
  }
  out.requests = Grid<int>(out.num_slots, out.num_users, 0);
  for (std::size_t n = 0; n < trace.num_slots; ++n) {
    for (std::size_t u = 0; u < trace.num_users; ++u) {
      const int j = trace.requests(n, u);
      if (j == 0) continue;
      for (std::size_t p = 0; p < factor; ++p) {
        out.requests(n * factor + p, u) = (j - 1) * static_cast<int>(factor) + static_cast<int>(p) + 1;
      }
    }
  }
  return out;
}

// A (slot, user) pair; (-1, -1) marks "no earlier request".
struct RequestRef {
  int slot = -1;
  int user = -1;
  bool valid() const noexcept { return slot >= 0; }
  friend bool operator==(const RequestRef&, const RequestRef&) = default;
};

enum class PrevMode {
  earlier_slots,  // duplicates in a slot never point at each other
  instantaneous,  // non-holders point at the same-slot holder (D2D relaying)
};

struct PrevNextMaps {
  Grid<RequestRef> prev;
  Grid<int> next;  // sentinel == num_slots
};

// prev(n,u): most recent earlier holder of the same file, where the holder of
// a file in a slot is its smallest-index requester. next(n,u) is defined on
// holders only and gives the slot of the request that links back to (n,u).
// The idle file is chained like any other file; its zero length makes the
// links inert.
inline PrevNextMaps prev_next_maps(const DemandTrace& trace, PrevMode mode = PrevMode::earlier_slots) {
  const std::size_t N = trace.num_slots;
  const std::size_t U = trace.num_users;
  const std::size_t F = trace.catalog.num_files();
  PrevNextMaps maps{Grid<RequestRef>(N, U), Grid<int>(N, U, static_cast<int>(N))};

  std::vector<RequestRef> last_holder(F + 1);
  std::vector<int> holder_stamp(F + 1, -1);
  std::vector<int> holder_user(F + 1, -1);

  for (std::size_t n = 0; n < N; ++n) {
    const int slot = static_cast<int>(n);
    for (std::size_t u = 0; u < U; ++u) {
      const auto j = static_cast<std::size_t>(trace.requests(n, u));
      const bool holder = holder_stamp[j] != slot;
      if (holder) {
        holder_stamp[j] = slot;
        holder_user[j] = static_cast<int>(u);
      }
      if (!holder && mode == PrevMode::instantaneous) {
        maps.prev(n, u) = RequestRef{slot, holder_user[j]};
      } else {
        maps.prev(n, u) = last_holder[j];
      }
      if (holder && last_holder[j].valid()) {
        maps.next(static_cast<std::size_t>(last_holder[j].slot), static_cast<std::size_t>(last_holder[j].user)) = slot;
      }
    }
    for (std::size_t u = 0; u < U; ++u) {
      const auto j = static_cast<std::size_t>(trace.requests(n, u));
      if (holder_user[j] == static_cast<int>(u)) last_holder[j] = RequestRef{slot, static_cast<int>(u)};
    }
  }
  return maps;
}

// Per-cell demand quantities derived from a trace. Rates are in Mnats/s.
struct DemandView {
  std::size_t num_slots = 0;
  std::size_t num_users = 0;
  double slot_seconds = 1.0;
  Grid<int> file;
  Grid<double> d;             // user demand rate
  Grid<std::uint8_t> sigma;   // holder indicator
  Grid<double> s;             // SBS (deduplicated) demand rate
  Grid<RequestRef> prev;
  Grid<int> next;

  bool is_holder(std::size_t n, std::size_t u) const { return sigma(n, u) != 0; }
  // Data volume of the deduplicated request in (n, u).
  double amount(std::size_t n, std::size_t u) const { return slot_seconds * s(n, u); }
};

inline DemandView build_view(const DemandTrace& trace, PrevMode mode = PrevMode::earlier_slots) {
  trace.validate();
  const std::size_t N = trace.num_slots;
  const std::size_t U = trace.num_users;
  DemandView v;
  v.num_slots = N;
  v.num_users = U;
  v.slot_seconds = trace.slot_seconds;
  v.file = trace.requests;
  v.d = Grid<double>(N, U, 0.0);
  v.s = Grid<double>(N, U, 0.0);
  v.sigma = Grid<std::uint8_t>(N, U, 0);

  std::vector<int> stamp(trace.catalog.num_files() + 1, -1);
  for (std::size_t n = 0; n < N; ++n) {
    for (std::size_t u = 0; u < U; ++u) {
      const int j = trace.requests(n, u);
      const double rate = trace.catalog.length(j) / trace.slot_seconds;
      v.d(n, u) = rate;
      if (stamp[static_cast<std::size_t>(j)] != static_cast<int>(n)) {
        stamp[static_cast<std::size_t>(j)] = static_cast<int>(n);
        v.sigma(n, u) = 1;
        v.s(n, u) = rate;
      }
    }
  }
  auto maps = prev_next_maps(trace, mode);
  v.prev = std::move(maps.prev);
  v.next = std::move(maps.next);
  return v;
}

}  // namespace edgecache
