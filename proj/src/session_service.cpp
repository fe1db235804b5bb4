// Copyright 2026 The lungseg Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "lungseg/session_service.hpp"

#include <httplib.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <mutex>
#include <shared_mutex>
#include <sstream>
#include <stdexcept>
#include <thread>

#include "lungseg/rle.hpp"

namespace lungseg {

namespace fs = std::filesystem;

namespace {

struct Session {
  std::string id;
  std::string scan_id;
  std::shared_ptr<const Volume> volume;
  std::shared_ptr<const MaskVolume> gt;
  BoundSegmenters segs;
  std::unique_ptr<InteractiveScan> scan;
  SessionLog log;
  std::vector<FeedbackAction> round;  // applied since the last refine
  mutable std::shared_mutex mu;
};

ApiResponse error(int status, const std::string& what) { return {status, {{"error", what}}}; }

nlohmann::json ledger_json(const FeedbackLedger& l) {
  return {{"n_pos", l.n_positive},
          {"n_neg", l.n_negative},
          {"n_erase", l.n_erasures},
          {"score", feedback_score(l)}};
}

nlohmann::json clicks_json(std::span<const Pixel> clicks) {
  nlohmann::json a = nlohmann::json::array();
  for (const Pixel& p : clicks) a.push_back({p.i, p.j});
  return a;
}

}  // namespace

struct SessionService::Impl {
  ServiceOptions opt;
  std::vector<ManifestEntry> manifest;
  fs::path base;

  mutable std::mutex scans_mu;
  mutable std::map<std::string, std::shared_ptr<const Volume>> volumes;
  mutable std::map<std::string, std::shared_ptr<const MaskVolume>> masks;

  mutable std::shared_mutex sessions_mu;
  std::map<std::string, std::shared_ptr<Session>> sessions;
  std::uint64_t next_id = 1;

  httplib::Server server;
  std::thread thread;
  bool bound = false;

  const ManifestEntry* find_entry(const std::string& scan_id) const {
    for (const auto& e : manifest) {
      if (e.scan_id == scan_id) return &e;
    }
    return nullptr;
  }

  std::pair<std::shared_ptr<const Volume>, std::shared_ptr<const MaskVolume>> load(
      const ManifestEntry& e) const {
    std::lock_guard<std::mutex> lock(scans_mu);
    auto it = volumes.find(e.scan_id);
    if (it == volumes.end()) {
      auto v = std::make_shared<const Volume>(load_entry_volume(e, base));
      auto m = load_entry_mask(e, base);
      it = volumes.emplace(e.scan_id, v).first;
      masks[e.scan_id] = m ? std::make_shared<const MaskVolume>(std::move(*m)) : nullptr;
    }
    return {it->second, masks[e.scan_id]};
  }

  std::shared_ptr<Session> find(const std::string& id) const {
    std::shared_lock<std::shared_mutex> lock(sessions_mu);
    auto it = sessions.find(id);
    return it == sessions.end() ? nullptr : it->second;
  }

  void persist(const Session& s) const {
    if (!opt.log_dir) return;
    fs::create_directories(*opt.log_dir);
    std::ofstream out(*opt.log_dir / (s.id + ".jsonl"));
    write_session_jsonl(out, s.log);
  }

  std::vector<int> close_round(Session& s) const {
    std::vector<int> refined = s.scan->refine_pending();
    s.log.iterations.push_back(record_iteration(*s.scan, s.gt.get(), std::move(s.round)));
    s.round.clear();
    persist(s);
    return refined;
  }
};

SessionService::SessionService(ServiceOptions options) : impl_(std::make_unique<Impl>()) {
  impl_->opt = std::move(options);
  impl_->manifest = read_manifest(impl_->opt.manifest);
  impl_->base = impl_->opt.manifest.parent_path();

  auto& srv = impl_->server;
  auto reply = [](httplib::Response& res, const ApiResponse& r) {
    res.status = r.status;
    res.set_content(r.body.dump(), "application/json");
  };
  // Runs a handler, mapping exceptions to error responses.
  auto guarded = [reply](auto fn) {
    return [reply, fn](const httplib::Request& req, httplib::Response& res) {
      try {
        reply(res, fn(req));
      } catch (const nlohmann::json::exception& e) {
        reply(res, error(400, std::string("bad request: ") + e.what()));
      } catch (const std::invalid_argument& e) {
        reply(res, error(400, e.what()));
      } catch (const std::out_of_range& e) {
        reply(res, error(400, e.what()));
      } catch (const std::exception& e) {
        reply(res, error(500, e.what()));
      }
    };
  };
  auto body_of = [](const httplib::Request& req) {
    if (req.body.empty()) return nlohmann::json::object();
    auto j = nlohmann::json::parse(req.body, nullptr, false);
    if (j.is_discarded()) throw std::invalid_argument("request body is not JSON");
    return j;
  };
  auto slice_index = [](const std::string& s) {
    try {
      std::size_t used = 0;
      const int k = std::stoi(s, &used);
      if (used != s.size()) throw std::invalid_argument("");
      return k;
    } catch (const std::exception&) {
      throw std::invalid_argument("bad slice index '" + s + "'");
    }
  };

  srv.Get("/scans", guarded([this](const httplib::Request&) { return list_scans(); }));
  srv.Post("/sessions", guarded([this, body_of](const httplib::Request& req) {
             return create_session(body_of(req));
           }));
  srv.Get(R"(/sessions/([^/]+)/slices/([^/]+))",
          guarded([this, slice_index](const httplib::Request& req) {
            return get_slice(req.matches[1], slice_index(req.matches[2]));
          }));
  srv.Get(R"(/sessions/([^/]+)/slices/([^/]+)/mask)",
          guarded([this, slice_index](const httplib::Request& req) {
            return get_mask(req.matches[1], slice_index(req.matches[2]));
          }));
  srv.Post(R"(/sessions/([^/]+)/feedback)", guarded([this, body_of](const httplib::Request& req) {
             return post_feedback(req.matches[1], body_of(req));
           }));
  srv.Post(R"(/sessions/([^/]+)/refine)",
           guarded([this](const httplib::Request& req) { return refine(req.matches[1]); }));
  srv.Get(R"(/sessions/([^/]+)/metrics)",
          guarded([this](const httplib::Request& req) { return metrics(req.matches[1]); }));
  srv.Get(R"(/sessions/([^/]+)/log)", [this](const httplib::Request& req, httplib::Response& res) {
    const auto text = session_log(req.matches[1]);
    if (!text) {
      res.status = 404;
      res.set_content(nlohmann::json{{"error", "unknown session"}}.dump(), "application/json");
      return;
    }
    res.set_content(*text, "application/x-ndjson");
  });
}

SessionService::~SessionService() { stop(); }

ApiResponse SessionService::list_scans() const {
  nlohmann::json scans = nlohmann::json::array();
  for (const auto& e : impl_->manifest) {
    scans.push_back({{"scan_id", e.scan_id},
                     {"patient_id", e.patient_id},
                     {"has_mask", e.mask_path.has_value()}});
  }
  return {200, {{"scans", scans}}};
}

ApiResponse SessionService::create_session(const nlohmann::json& body) {
  if (!body.is_object() || !body.contains("scan_id") || !body["scan_id"].is_string()) {
    return error(400, "scan_id is required");
  }
  const std::string scan_id = body["scan_id"].get<std::string>();
  const ManifestEntry* entry = impl_->find_entry(scan_id);
  if (!entry) return error(404, "unknown scan '" + scan_id + "'");

  SystemSpec spec = impl_->opt.defaults;
  const auto& topo = body.contains("topology") ? body["topology"] : nlohmann::json("system3");
  spec.topology = topology_from_string(topo.is_number_integer()
                                           ? std::to_string(topo.get<int>())
                                           : topo.get<std::string>());
  spec.iterations = spec.topology == Topology::system1_noninteractive ? 0 : 1;

  const std::string seg_name = body.value("segmenter", std::string("conservative"));
  std::optional<SegmenterBinding> binding;
  try {
    binding = SegmenterBinding::parse(seg_name, impl_->opt.params);
  } catch (const std::exception& e) {
    return error(400, std::string("segmenter: ") + e.what());
  }

  auto s = std::make_shared<Session>();
  s->scan_id = scan_id;
  std::tie(s->volume, s->gt) = impl_->load(*entry);
  if (binding->needs_ground_truth() && !s->gt) {
    return error(400, "segmenter '" + seg_name + "' needs a ground-truth mask");
  }
  s->segs = binding->bind(s->gt);
  s->scan = std::make_unique<InteractiveScan>(s->volume, spec, s->segs.raw(), 0);
  s->scan->initialize();
  s->log.scan_id = scan_id;
  s->log.topology = spec.topology;
  s->log.iterations.push_back(record_iteration(*s->scan, s->gt.get(), {}));

  {
    std::unique_lock<std::shared_mutex> lock(impl_->sessions_mu);
    s->id = "s" + std::to_string(impl_->next_id++);
    impl_->sessions[s->id] = s;
  }
  impl_->persist(*s);
  const Dims d = s->volume->dims;
  return {201,
          {{"session_id", s->id},
           {"scan_id", scan_id},
           {"topology", to_string(spec.topology)},
           {"segmenter", seg_name},
           {"n_slices", d.n_slices},
           {"shape", {d.height, d.width}},
           {"has_ground_truth", s->gt != nullptr},
           {"iteration", 0}}};
}

ApiResponse SessionService::get_slice(const std::string& id, int k) const {
  auto s = impl_->find(id);
  if (!s) return error(404, "unknown session '" + id + "'");
  std::shared_lock<std::shared_mutex> lock(s->mu);
  if (k < 0 || k >= s->scan->n_slices()) return error(400, "slice index out of range");
  const SliceWindow w = s->scan->window(k);
  const FloatPlane& c = w.center();
  std::string pixels(c.size(), '\0');
  for (std::size_t p = 0; p < c.size(); ++p) {
    const float v = std::clamp(c.values()[p], 0.0f, 1.0f);
    pixels[p] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0f)));
  }
  const ClickCache& cache = s->scan->cache();
  return {200,
          {{"k", k},
           {"shape", {c.height(), c.width()}},
           {"image", httplib::detail::base64_encode(pixels)},
           {"mask", rle_encode(s->scan->masks().slice(k))},
           {"clicks",
            {{"pos", clicks_json(cache.clicks(k, Polarity::positive))},
             {"neg", clicks_json(cache.clicks(k, Polarity::negative))}}},
           {"iteration", s->scan->iteration()}}};
}

ApiResponse SessionService::get_mask(const std::string& id, int k) const {
  auto s = impl_->find(id);
  if (!s) return error(404, "unknown session '" + id + "'");
  std::shared_lock<std::shared_mutex> lock(s->mu);
  if (k < 0 || k >= s->scan->n_slices()) return error(400, "slice index out of range");
  nlohmann::json j = rle_encode(s->scan->masks().slice(k));
  j["k"] = k;
  j["iteration"] = s->scan->iteration();
  return {200, j};
}

ApiResponse SessionService::post_feedback(const std::string& id, const nlohmann::json& body) {
  auto s = impl_->find(id);
  if (!s) return error(404, "unknown session '" + id + "'");
  if (!body.is_object() || !body.contains("k") || !body.contains("action")) {
    return error(400, "feedback needs k and action");
  }
  const int k = body["k"].get<int>();
  const ActionKind kind = action_kind_from_string(body["action"].get<std::string>());
  const bool defer = body.value("defer", false);

  std::unique_lock<std::shared_mutex> lock(s->mu);
  if (s->log.topology == Topology::system1_noninteractive) {
    return error(400, "system1 sessions take no feedback");
  }
  if (k < 0 || k >= s->scan->n_slices()) return error(400, "slice index out of range");
  FeedbackAction a;
  switch (kind) {
    case ActionKind::erase:
      a = FeedbackAction::erase(k);
      break;
    case ActionKind::positive_click:
    case ActionKind::negative_click: {
      if (!body.contains("i") || !body.contains("j")) return error(400, "clicks need i and j");
      const Pixel p{body["i"].get<int>(), body["j"].get<int>()};
      if (p.i < 0 || p.j < 0 || p.i >= s->volume->dims.height || p.j >= s->volume->dims.width) {
        return error(400, "click outside the slice");
      }
      a = FeedbackAction::click(k, p, kind == ActionKind::positive_click ? Polarity::positive
                                                                        : Polarity::negative);
      break;
    }
    case ActionKind::none:
      return error(400, "action must be pos, neg or erase");
  }
  const ApplyStatus st = s->scan->apply(a);
  if (st == ApplyStatus::cap || st == ApplyStatus::duplicate) {
    return {409,
            {{"accepted", false},
             {"reason", st == ApplyStatus::cap ? "cap" : "duplicate"},
             {"k", k},
             {"ledger", ledger_json(s->scan->ledger())}}};
  }
  s->round.push_back(a);
  std::vector<int> refined;
  if (!defer) refined = impl_->close_round(*s);
  std::vector<int> pending(s->scan->pending().begin(), s->scan->pending().end());
  return {200,
          {{"accepted", true},
           {"k", k},
           {"action", to_string(a.kind)},
           {"mask", rle_encode(s->scan->masks().slice(k))},
           {"iteration", s->scan->iteration()},
           {"refined", refined},
           {"pending", pending},
           {"ledger", ledger_json(s->scan->ledger())}}};
}

ApiResponse SessionService::refine(const std::string& id) {
  auto s = impl_->find(id);
  if (!s) return error(404, "unknown session '" + id + "'");
  std::unique_lock<std::shared_mutex> lock(s->mu);
  if (s->log.topology == Topology::system1_noninteractive) {
    return error(400, "system1 sessions take no feedback");
  }
  const std::vector<int> refined = impl_->close_round(*s);
  return {200,
          {{"iteration", s->scan->iteration()},
           {"refined", refined},
           {"ledger", ledger_json(s->scan->ledger())}}};
}

ApiResponse SessionService::metrics(const std::string& id) const {
  auto s = impl_->find(id);
  if (!s) return error(404, "unknown session '" + id + "'");
  std::shared_lock<std::shared_mutex> lock(s->mu);
  nlohmann::json j = ledger_json(s->scan->ledger());
  j["iteration"] = s->scan->iteration();
  if (s->gt) j["iou"] = scan_iou(*s->gt, s->scan->masks());
  return {200, j};
}

std::optional<std::string> SessionService::session_log(const std::string& id) const {
  auto s = impl_->find(id);
  if (!s) return std::nullopt;
  std::shared_lock<std::shared_mutex> lock(s->mu);
  std::ostringstream os;
  write_session_jsonl(os, s->log);
  return os.str();
}

int SessionService::bind(const std::string& host, int port) {
  if (port == 0) {
    port = impl_->server.bind_to_any_port(host);
    if (port < 0) throw std::runtime_error("cannot bind " + host);
  } else if (!impl_->server.bind_to_port(host, port)) {
    throw std::runtime_error("cannot bind " + host + ":" + std::to_string(port));
  }
  impl_->bound = true;
  return port;
}

void SessionService::serve() {
  if (!impl_->bound) throw std::logic_error("serve() before bind()");
  impl_->server.listen_after_bind();
}

void SessionService::start() {
  if (!impl_->bound) throw std::logic_error("start() before bind()");
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

void SessionService::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace lungseg
