#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <vector>

namespace fedback {

/// Controller telemetry for one client in one round. `load` and `delta` are
/// the values after the round's update (L^{k+1}, delta^{k+1}); `distance` is
/// the trigger distance |omega^k - z_prev| the decision was made on.
struct ClientRecord {
  std::uint8_t event = 0;
  double load = 0.0;
  double delta = 0.0;
  double distance = 0.0;

  bool operator==(const ClientRecord&) const = default;
};

/// One round of a run. Stationarity quantities are evaluated on the state
/// after the round (omega^{k+1}, Theta^{k+1}, Lambda^{k+1}).
struct RoundTrace {
  std::int64_t round = 0;
  std::vector<std::size_t> selected;
  std::size_t selected_count = 0;
  /// Empty for algorithms without a participation controller.
  std::vector<ClientRecord> per_client;
  double omega_norm = 0.0;
  double grad_norm_global = 0.0;
  double lagrangian = 0.0;
  double F_theta = 0.0;
  double f_omega = 0.0;
  /// f_omega minus the centralized optimum, when the optimum is known.
  std::optional<double> loss_gap;
  std::int64_t cumulative_events = 0;

  bool operator==(const RoundTrace&) const = default;
};

using Trace = std::vector<RoundTrace>;

/// Comma-separated text, one row per round, 17 significant digits.
///
/// Fixed columns:
///   round,selected_count,cumulative_events,omega_norm,grad_norm_global,
///   lagrangian,F_theta,f_omega,loss_gap,selected
/// `loss_gap` is empty when unknown; `selected` lists client indices joined
/// by ';'. With per-client columns enabled, each client i adds
///   S_i,L_i,delta_i,dist_i
void emit_trace(const Trace& trace, std::ostream& out, bool per_client_columns = true);
void emit_trace(const Trace& trace, const std::filesystem::path& path, bool per_client_columns = true);

/// Throws ParseError naming the row (1-based, header is row 1) and field.
Trace load_trace(std::istream& in);
Trace load_trace(const std::filesystem::path& path);

}  // namespace fedback
