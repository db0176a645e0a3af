#pragma once

#include <chrono>
#include <cstdint>
#include <mutex>
#include <string>

#include "stabletree/oracle/oracle.hpp"

namespace stabletree::oracle {

/// Oracle served by a child process over line-delimited JSON:
///   request  {"id":u64,"rows":[[f64,...],...]}\n   on the child's stdin
///   reply    {"id":u64,"probs":[[f64,...],...]}\n  on the child's stdout
/// Requests are serialized through one channel. A crash, a timeout or a
/// malformed reply raises OracleIoError.
class ExternalProcessOracle final : public Oracle {
 public:
  ExternalProcessOracle(std::string command, std::size_t class_count, std::size_t feature_count,
                        std::chrono::milliseconds timeout = std::chrono::seconds(60),
                        std::size_t max_batch = 20000);
  ~ExternalProcessOracle() override;

  ExternalProcessOracle(const ExternalProcessOracle&) = delete;
  ExternalProcessOracle& operator=(const ExternalProcessOracle&) = delete;

  [[nodiscard]] std::size_t class_count() const override { return k_; }
  [[nodiscard]] std::size_t feature_count() const override { return m_; }
  [[nodiscard]] core::Matrix predict_proba(const core::Matrix& rows) const override;
  [[nodiscard]] std::string describe() const override { return "external: " + command_; }

 private:
  void start() const;
  void stop() const;
  std::string exchange(const std::string& request) const;

  std::string command_;
  std::size_t k_;
  std::size_t m_;
  std::chrono::milliseconds timeout_;
  std::size_t max_batch_;

  mutable std::mutex mutex_;
  mutable int pid_ = -1;
  mutable int to_child_ = -1;
  mutable int from_child_ = -1;
  mutable std::string pending_;
  mutable std::uint64_t next_id_ = 1;
};

}  // namespace stabletree::oracle
