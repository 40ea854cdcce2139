// Serves a toy LM table (logprobs op) and lexical rewards (score op) over the line
// protocol, for exercising the remote clients end to end.

#include <pthread.h>

#include <csignal>
#include <iostream>
#include <memory>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "prefsteer/backend.hpp"
#include "prefsteer/reward.hpp"
#include "prefsteer/wire.hpp"

using namespace prefsteer;

int main(int argc, char** argv) {
  CLI::App app{"Line-protocol server for a toy LM table and lexical rewards"};
  std::string table_path;
  std::vector<std::string> reward_paths;
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  app.add_option("--table", table_path, "Toy LM table (JSON)")->required();
  app.add_option("--reward", reward_paths, "Lexical reward spec (JSON); repeatable");
  app.add_option("--host", host, "IPv4 address to bind");
  app.add_option("--port", port, "Port; 0 picks a free one");
  CLI11_PARSE(app, argc, argv);

  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);

  try {
    ToyLm lm(ToyLmTable::load(table_path));
    std::vector<std::unique_ptr<RewardModel>> rewards;
    std::vector<const RewardModel*> reward_ptrs;
    for (const auto& p : reward_paths) {
      rewards.push_back(std::make_unique<LexicalReward>(LexicalRewardSpec::load(p), lm.vocab()));
      reward_ptrs.push_back(rewards.back().get());
    }
    LineServer server(
        [&](std::string_view line) -> std::string {
          bool is_score = false;
          try {
            is_score = std::holds_alternative<wire::ScoreRequest>(wire::decode(line));
          } catch (const ProtocolError&) {
          }
          return is_score ? serve_scores(reward_ptrs, line) : serve_logprobs(lm, line);
        },
        host, port);
    std::cout << server.endpoint().to_string() << std::endl;

    int sig = 0;
    sigwait(&set, &sig);
    server.stop();
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
