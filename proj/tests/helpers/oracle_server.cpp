// Line-delimited JSON oracle over the synthetic design, used by the external
// oracle tests. The first argument picks a behaviour:
//   ok         answer every request
//   crash-after N   exit after N replies
//   hang       read requests, never answer
//   garbage    reply with text that is not JSON
//   wrong-id   echo a different id
//   bad-probs  rows that do not sum to one
//   short      one probability row too few
#include <chrono>
#include <cstdlib>
#include <iostream>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "stabletree/synth/synth.hpp"

int main(int argc, char** argv) {
  const std::string mode = argc > 1 ? argv[1] : "ok";
  const long crash_after = argc > 2 ? std::atol(argv[2]) : 0;
  long served = 0;
  std::string line;
  while (std::getline(std::cin, line)) {
    if (mode == "hang") continue;
    if (mode == "crash-after" && served >= crash_after) return 1;
    if (mode == "garbage") {
      std::cout << "this is not json" << std::endl;
      continue;
    }
    const auto req = nlohmann::json::parse(line);
    nlohmann::json probs = nlohmann::json::array();
    for (const auto& row : req.at("rows")) {
      const auto x = row.get<std::vector<double>>();
      const double p = stabletree::synth::prob_one(x);
      if (mode == "bad-probs")
        probs.push_back({p, p + 0.5});
      else
        probs.push_back({1.0 - p, p});
    }
    if (mode == "short" && !probs.empty()) probs.erase(probs.size() - 1);
    auto id = req.at("id").get<std::uint64_t>();
    if (mode == "wrong-id") id += 17;
    std::cout << nlohmann::json{{"id", id}, {"probs", probs}}.dump() << std::endl;
    ++served;
  }
  return 0;
}
