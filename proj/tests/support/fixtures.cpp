#include "fixtures.hpp"

#include <httplib.h>

#include <random>

#include "coldbench/util/rng.hpp"

namespace testing_support {

using namespace coldbench;

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = fs::temp_directory_path() /
          ("coldbench-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
  fs::remove_all(path_);
  fs::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

corpus::Dataset planted_dataset(const PlantedOptions& o) {
  Rng rng(o.seed);
  std::vector<std::string> vocab;
  for (int i = 0; i < o.filler_vocab; ++i) vocab.push_back("word" + std::to_string(i));
  auto filler = [&] {
    std::string s;
    for (int i = 0; i < o.filler_words; ++i) {
      if (i) s += ' ';
      s += vocab[rng.below(vocab.size())];
    }
    return s;
  };

  std::vector<corpus::Item> items;
  std::vector<corpus::UserRecord> users;
  for (int u = 0; u < o.users; ++u) {
    char uid[16];
    std::snprintf(uid, sizeof uid, "u%05d", u);
    const std::string token = "marker" + std::to_string(u) + "x";
    corpus::UserRecord user;
    user.user_id = uid;
    user.profile = {{"interest", "enjoys " + token + " " + filler()}, {"age", std::to_string(18 + u % 50)}};
    for (int j = 0; j < o.items_per_user; ++j) {
      const std::string iid = std::string("i") + uid + "_" + std::to_string(j);
      items.push_back({iid, {{"title", filler() + " " + token}, {"genre", filler()}}});
      user.interactions.push_back({iid, 1000 + j});
    }
    users.push_back(std::move(user));
  }
  return corpus::Dataset::create(o.domain, std::move(items), std::move(users));
}

corpus::Dataset random_dataset(const RandomOptions& o) {
  Rng rng(o.seed);
  std::vector<corpus::Item> items;
  for (int i = 0; i < o.items; ++i) {
    items.push_back({"it" + std::to_string(i), {{"title", "item number " + std::to_string(i)}}});
  }
  std::vector<corpus::UserRecord> users;
  for (int u = 0; u < o.users; ++u) {
    corpus::UserRecord user;
    user.user_id = o.user_prefix + std::to_string(u);
    user.profile = {{"id", std::to_string(u)}, {"bucket", std::to_string(u % 7)}};
    const int n = o.min_history + static_cast<int>(rng.below(static_cast<std::uint64_t>(o.max_history - o.min_history + 1)));
    std::int64_t ts = 1'000'000 + static_cast<std::int64_t>(rng.below(1000));
    for (int k = 0; k < n; ++k) {
      std::string item;
      if (k > 0 && rng.uniform() < o.repeat_rate) {
        item = user.interactions[rng.below(user.interactions.size())].item_id;
      } else {
        item = "it" + std::to_string(rng.below(static_cast<std::uint64_t>(o.items)));
      }
      if (!(k > 0 && rng.uniform() < o.tie_rate)) ts += 1 + static_cast<std::int64_t>(rng.below(100));
      user.interactions.push_back({item, ts});
    }
    // shuffle the input rows so loading has to sort
    std::vector<corpus::Interaction> rows = user.interactions;
    rng.shuffle(rows);
    user.interactions = rows;
    users.push_back(std::move(user));
  }
  return corpus::Dataset::create(o.domain, std::move(items), std::move(users));
}

std::string ScriptedLlm::complete(const std::string& prompt) {
  std::size_t n;
  {
    std::lock_guard lock(mutex_);
    prompts_.push_back(prompt);
    n = calls_++;
  }
  return script_(prompt, n);
}

std::vector<std::string> ScriptedLlm::prompts() const {
  std::lock_guard lock(mutex_);
  return prompts_;
}

MockServer::MockServer() : server_(std::make_unique<httplib::Server>()) {}

MockServer::~MockServer() {
  server_->stop();
  if (thread_.joinable()) thread_.join();
}

void MockServer::on_post(const std::string& path, Handler handler) {
  server_->Post(path, [handler](const httplib::Request& req, httplib::Response& res) {
    auto [status, body] = handler(req.body);
    res.status = status;
    res.set_content(body, "application/json");
  });
}

void MockServer::start() {
  port_ = server_->bind_to_any_port("127.0.0.1");
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
}

std::string MockServer::endpoint() const { return "http://127.0.0.1:" + std::to_string(port_); }

}  // namespace testing_support
