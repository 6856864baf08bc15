// Copyright 2026 The ppgpr Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

// Round-synchronous in-process message passing.
//
// A round consists of one or more phases. In each phase every agent runs the
// same callback and may send messages; the barrier at the end of the phase
// delivers them into the receivers' inboxes in canonical order. Inboxes are
// cleared when the round closes, so nothing sent in round t is visible in
// round t+1.

#include <algorithm>
#include <chrono>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <tuple>
#include <utility>
#include <vector>

#include "ppgpr/errors.hpp"
#include "ppgpr/random.hpp"
#include "ppgpr/ring.hpp"
#include "ppgpr/topology.hpp"

namespace ppgpr {

enum class MessageKind : std::uint8_t { share = 0, masked_contribution = 1 };

inline std::string_view to_string(MessageKind kind) {
  return kind == MessageKind::share ? "share" : "masked";
}

struct Message {
  std::size_t round = 0;
  AgentId sender = 0;
  AgentId receiver = 0;
  MessageKind kind = MessageKind::share;
  /// The aggregating agent whose update this message serves.
  AgentId aggregator = 0;
  RingVector payload;

  /// Self-shares are bookkeeping only; they never cross the network.
  bool transmitted() const { return sender != receiver; }

  friend bool operator==(const Message&, const Message&) = default;
};

inline bool canonical_less(const Message& a, const Message& b) {
  return std::tie(a.round, a.sender, a.receiver, a.kind, a.aggregator) <
         std::tie(b.round, b.sender, b.receiver, b.kind, b.aggregator);
}

struct RoundCounts {
  std::size_t shares = 0;  // transmitted shares only
  std::size_t masked = 0;
  std::size_t self_shares = 0;

  std::size_t transmitted() const { return shares + masked; }
};

class Transcript {
 public:
  std::span<const Message> messages() const { return messages_; }
  std::size_t rounds() const { return rounds_; }
  bool empty() const { return messages_.empty(); }

  RoundCounts counts(std::size_t round) const {
    RoundCounts c;
    for (const Message& m : messages_) {
      if (m.round != round) continue;
      if (!m.transmitted()) {
        ++c.self_shares;
      } else if (m.kind == MessageKind::share) {
        ++c.shares;
      } else {
        ++c.masked;
      }
    }
    return c;
  }

  /// Msg_i: everything agent i holds from the run, its own self-shares
  /// included (it generated them, so they are part of its view).
  std::vector<Message> received_by(AgentId agent) const {
    std::vector<Message> out;
    for (const Message& m : messages_) {
      if (m.receiver == agent) out.push_back(m);
    }
    return out;
  }

  void append_round(std::vector<Message> round_messages) {
    std::sort(round_messages.begin(), round_messages.end(), canonical_less);
    for (auto& m : round_messages) messages_.push_back(std::move(m));
    ++rounds_;
  }

  friend bool operator==(const Transcript&, const Transcript&) = default;

 private:
  std::vector<Message> messages_;
  std::size_t rounds_ = 0;
};

/// One record per line:
///   round,sender,receiver,kind,aggregator,payload_1,...,payload_p
/// Agents are 1-based, kind is "share" or "masked". Self-shares are
/// included and recognisable by sender == receiver.
inline void write_transcript(std::ostream& out, const Transcript& t) {
  out << "round,sender,receiver,kind,aggregator,payload\n";
  for (const Message& m : t.messages()) {
    out << m.round << ',' << m.sender + 1 << ',' << m.receiver + 1 << ','
        << to_string(m.kind) << ',' << m.aggregator + 1;
    for (std::int64_t v : m.payload.entries()) out << ',' << v;
    out << '\n';
  }
}

class Network;

/// Called once per agent per phase.
using AgentPhase = std::function<void(AgentId agent, std::size_t round,
                                      Network& net)>;

class Network {
 public:
  /// Per-agent ChaCha20 streams derived from one seed.
  Network(Topology g, std::uint64_t seed) : graph_(std::move(g)) {
    rngs_.reserve(graph_.size());
    for (AgentId i = 0; i < graph_.size(); ++i) {
      rngs_.push_back(ShareRng::from_seed(seed, i));
    }
    inboxes_.resize(graph_.size());
  }

  static Network with_os_entropy(Topology g) {
    Network net(std::move(g));
    for (AgentId i = 0; i < net.graph_.size(); ++i) {
      net.rngs_.push_back(ShareRng::from_os_entropy());
    }
    return net;
  }

  const Topology& topology() const { return graph_; }
  std::size_t size() const { return graph_.size(); }
  std::size_t round() const { return round_; }

  /// Only the acting agent's generator is handed out during a phase.
  ShareRng& rng(AgentId agent) {
    if (acting_ && *acting_ != agent) {
      throw ProtocolError("agent " + std::to_string(*acting_ + 1) +
                          " tried to use the randomness of agent " +
                          std::to_string(agent + 1));
    }
    return rngs_.at(agent);
  }

  void send(AgentId receiver, MessageKind kind, AgentId aggregator,
            RingVector payload) {
    if (!acting_) {
      throw ProtocolError("send outside of an agent phase");
    }
    const AgentId sender = *acting_;
    if (receiver >= size() || aggregator >= size()) {
      throw ProtocolError("message addressed outside the network");
    }
    if (sender == receiver) {
      if (kind != MessageKind::share) {
        throw ProtocolError("only shares may be addressed to oneself");
      }
    } else if (!graph_.adjacent(sender, receiver)) {
      throw ProtocolError("no link " + edge_label(sender, receiver));
    }
    pending_.push_back(Message{round_, sender, receiver, kind, aggregator,
                               std::move(payload)});
  }

  /// Messages delivered to `agent` by earlier phases of the current round.
  std::span<const Message> inbox(AgentId agent) const {
    return inboxes_.at(agent);
  }

  /// Runs `rounds` rounds; each round executes every phase for every agent
  /// and then closes with a barrier.
  void run_rounds(std::size_t rounds, std::span<const AgentPhase> phases) {
    for (std::size_t r = 0; r < rounds; ++r) {
      for (const AgentPhase& phase : phases) {
        for (AgentId i = 0; i < size(); ++i) {
          acting_ = i;
          try {
            phase(i, round_, *this);
          } catch (const std::exception& e) {
            acting_.reset();
            pending_.clear();
            throw ProtocolError("round " + std::to_string(round_) +
                                ", agent " + std::to_string(i + 1) + ": " +
                                e.what());
          }
        }
        acting_.reset();
        deliver();
      }
      close_round();
    }
  }

  const Transcript& transcript() const { return transcript_; }
  Transcript take_transcript() { return std::exchange(transcript_, {}); }

 private:
  explicit Network(Topology g) : graph_(std::move(g)) {
    inboxes_.resize(graph_.size());
  }

  void deliver() {
    std::sort(pending_.begin(), pending_.end(), canonical_less);
    for (Message& m : pending_) {
      inboxes_[m.receiver].push_back(m);
      this_round_.push_back(std::move(m));
    }
    pending_.clear();
  }

  void close_round() {
    transcript_.append_round(std::move(this_round_));
    this_round_.clear();
    for (auto& box : inboxes_) box.clear();
    ++round_;
  }

  Topology graph_;
  std::vector<ShareRng> rngs_;
  std::vector<std::vector<Message>> inboxes_;
  std::vector<Message> pending_;
  std::vector<Message> this_round_;
  std::optional<AgentId> acting_;
  std::size_t round_ = 0;
  Transcript transcript_;
};

struct LatencyReport {
  std::size_t rounds = 0;
  double communication_seconds = 0.0;
  double compute_seconds = 0.0;

  double total_seconds() const {
    return communication_seconds + compute_seconds;
  }
};

/// Accounting only: rounds × delay is attributed to communication and
/// added to the measured compute time.
inline LatencyReport emulate_latency(const Transcript& t,
                                     std::chrono::duration<double> per_round,
                                     std::chrono::duration<double> compute) {
  LatencyReport r;
  r.rounds = t.rounds();
  r.communication_seconds = static_cast<double>(r.rounds) * per_round.count();
  r.compute_seconds = compute.count();
  return r;
}

}  // namespace ppgpr
