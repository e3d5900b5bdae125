#include "pdd/protocol.h"

#include <charconv>
#include <limits>

#include "json.hpp"
#include "pdd/base64.h"
#include "pdd/errors.h"

namespace pdd {

namespace {

using ordered_json = nlohmann::ordered_json;
using json = nlohmann::json;

constexpr std::string_view kDataPrefix = "data: ";
constexpr std::string_view kFrameEnd = "\n\n";

std::string dump(const ordered_json& j, const char* field) {
  try {
    return j.dump();
  } catch (const json::exception&) {
    throw ProtocolError(field, "text is not valid UTF-8");
  }
}

json parse_object(std::string_view body, std::initializer_list<std::string_view> keys) {
  json j;
  try {
    j = json::parse(body);
  } catch (const json::exception& e) {
    throw ProtocolError("body", std::string("malformed JSON: ") + e.what());
  }
  if (!j.is_object()) throw ProtocolError("body", "expected a JSON object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool known = false;
    for (auto k : keys) known = known || it.key() == k;
    if (!known) throw ProtocolError(it.key(), "unexpected field");
  }
  for (auto k : keys) {
    if (!j.contains(k)) throw ProtocolError(std::string(k), "missing field");
  }
  return j;
}

std::string get_string(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_string()) throw ProtocolError(key, "expected a string");
  return v.get<std::string>();
}

std::uint32_t get_count(const json& j, const char* key) {
  const auto& v = j.at(key);
  if (!v.is_number_unsigned()) throw ProtocolError(key, "expected a non-negative integer");
  const auto n = v.get<std::uint64_t>();
  if (n < 1 || n > std::numeric_limits<std::uint32_t>::max()) {
    throw ProtocolError(key, "out of range");
  }
  return static_cast<std::uint32_t>(n);
}

std::string_view frame_body(std::string_view frame) {
  if (frame.size() < kDataPrefix.size() + kFrameEnd.size() ||
      frame.substr(0, kDataPrefix.size()) != kDataPrefix ||
      frame.substr(frame.size() - kFrameEnd.size()) != kFrameEnd) {
    throw ProtocolError("frame", "expected 'data: <body>\\n\\n'");
  }
  const auto body = frame.substr(kDataPrefix.size(),
                                 frame.size() - kDataPrefix.size() - kFrameEnd.size());
  if (body.find(kFrameEnd) != std::string_view::npos) {
    throw ProtocolError("frame", "more than one frame");
  }
  return body;
}

CompressedMask mask_from_b64(const std::string& text) {
  std::vector<std::uint8_t> bytes;
  try {
    bytes = base64_decode(text);
  } catch (const CodecError& e) {
    throw ProtocolError("mask_b64", e.what());
  }
  return compressed_mask_from_container(std::move(bytes));
}

FirstTokenFrame first_frame_from_body(std::string_view body) {
  const json j = parse_object(body, {"first_token", "mask_b64", "L"});
  FirstTokenFrame f;
  f.token = get_string(j, "first_token");
  f.L = get_count(j, "L");
  f.mask = mask_from_b64(get_string(j, "mask_b64"));
  return f;
}

StreamEvent event_from_body(std::string_view body) {
  const json j = parse_object(body, {"i", "token"});
  StreamEvent e;
  e.index = get_count(j, "i");
  e.token = get_string(j, "token");
  return e;
}

std::string event_frame(const StreamEvent& e) {
  ordered_json j;
  j["i"] = e.index;
  j["token"] = e.token;
  return std::string(kDataPrefix) + dump(j, "token") + std::string(kFrameEnd);
}

}  // namespace

std::string encode_request(const AssistRequest& r) {
  ordered_json j;
  j["scene"] = r.scene;
  j["model_version_label"] = r.model_version_label;
  j["device_class"] = r.device_class;
  j["prefix"] = r.prefix;
  j["content"] = r.content;
  j["suffix"] = r.suffix;
  j["request_id"] = r.request_id;
  return dump(j, "request");
}

AssistRequest decode_request(std::string_view body) {
  const json j = parse_object(body, {"scene", "model_version_label", "device_class", "prefix",
                                     "content", "suffix", "request_id"});
  AssistRequest r;
  r.scene = get_string(j, "scene");
  r.model_version_label = get_string(j, "model_version_label");
  r.device_class = get_string(j, "device_class");
  r.prefix = get_string(j, "prefix");
  r.content = get_string(j, "content");
  r.suffix = get_string(j, "suffix");
  r.request_id = get_string(j, "request_id");
  if (r.content.empty() && r.suffix.empty()) {
    throw ProtocolError("content", "content and suffix are both empty");
  }
  if (r.request_id.empty()) throw ProtocolError("request_id", "must be nonempty");
  return r;
}

std::string encode_first_frame(const FirstTokenFrame& f) {
  if (f.L < 1) throw ProtocolError("L", "must be at least 1");
  ordered_json j;
  j["first_token"] = f.token;
  j["mask_b64"] = base64_encode(f.mask.payload);
  j["L"] = f.L;
  return std::string(kDataPrefix) + dump(j, "first_token") + std::string(kFrameEnd);
}

FirstTokenFrame decode_first_frame(std::string_view bytes) {
  return first_frame_from_body(frame_body(bytes));
}

std::string encode_first_frame_compact(const FirstTokenFrame& f) {
  if (f.token.find('#') != std::string::npos) {
    throw ProtocolError("first_token", "'#' is not allowed in the compact form");
  }
  if (f.L < 1) throw ProtocolError("L", "must be at least 1");
  return f.token + '#' + base64_encode(f.mask.payload) + '#' + std::to_string(f.L);
}

FirstTokenFrame decode_first_frame_compact(std::string_view bytes) {
  const auto a = bytes.find('#');
  const auto b = a == std::string_view::npos ? a : bytes.find('#', a + 1);
  if (b == std::string_view::npos || bytes.find('#', b + 1) != std::string_view::npos) {
    throw ProtocolError("frame", "expected exactly two '#' delimiters");
  }
  FirstTokenFrame f;
  f.token = std::string(bytes.substr(0, a));
  f.mask = mask_from_b64(std::string(bytes.substr(a + 1, b - a - 1)));
  const auto digits = bytes.substr(b + 1);
  std::uint32_t L = 0;
  const auto [end, ec] = std::from_chars(digits.data(), digits.data() + digits.size(), L);
  if (ec != std::errc() || end != digits.data() + digits.size() || digits.empty() || L < 1 ||
      (digits.size() > 1 && digits[0] == '0')) {
    throw ProtocolError("L", "expected a positive decimal integer");
  }
  f.L = L;
  return f;
}

std::string encode_stream_event(const StreamEvent& e) {
  if (e.index < 1) throw ProtocolError("i", "must be at least 1");
  auto out = event_frame(e);
  if (e.terminal) out += kDoneFrame;
  return out;
}

StreamEvent decode_stream_event(std::string_view bytes) {
  bool terminal = false;
  if (bytes.size() > kDoneFrame.size() &&
      bytes.substr(bytes.size() - kDoneFrame.size()) == kDoneFrame) {
    terminal = true;
    bytes.remove_suffix(kDoneFrame.size());
  }
  StreamEvent e = event_from_body(frame_body(bytes));
  e.terminal = terminal;
  return e;
}

std::vector<StreamItem> StreamDecoder::feed(std::string_view bytes) {
  std::vector<StreamItem> items;
  buffer_.append(bytes);
  std::size_t start = 0;
  while (true) {
    const auto end = buffer_.find(kFrameEnd, start);
    if (end == std::string::npos) break;
    const std::string_view frame(buffer_.data() + start, end + kFrameEnd.size() - start);
    start = end + kFrameEnd.size();
    if (discarding_) {
      discarding_ = false;
      continue;
    }
    items.push_back(decode_frame(frame));
  }
  buffer_.erase(0, start);
  if (buffer_.size() > kMaxFrameBytes) {
    // Keep the last byte: it may be the first half of the delimiter.
    buffer_.erase(0, buffer_.size() - 1);
    if (!discarding_) {
      ++faults_;
      items.push_back(StreamFault{"frame", "frame exceeds size limit"});
    }
    discarding_ = true;
  }
  return items;
}

StreamItem StreamDecoder::decode_frame(std::string_view frame) {
  try {
    const auto body = frame_body(frame);
    if (body == "[DONE]") {
      saw_end_ = true;
      return StreamEnd{};
    }
    if (!saw_first_) {
      auto f = first_frame_from_body(body);
      saw_first_ = true;
      return f;
    }
    auto e = event_from_body(body);
    if (e.index != next_index_) {
      const auto expected = next_index_;
      next_index_ = e.index + 1;
      throw ProtocolError("i", "expected index " + std::to_string(expected) + ", got " +
                                   std::to_string(e.index));
    }
    ++next_index_;
    return e;
  } catch (const ProtocolError& e) {
    ++faults_;
    return StreamFault{e.field(), e.what()};
  } catch (const CodecError& e) {
    ++faults_;
    return StreamFault{"mask_b64", e.what()};
  }
}

}  // namespace pdd
