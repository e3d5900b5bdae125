#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "pdd/maskcodec.h"
#include "pdd/timing.h"

namespace pdd {

// Canonical wire grammar (all text UTF-8, base64 standard alphabet, padded):
//
//   first frame  = "data: " {"first_token":<string>,"mask_b64":<string>,"L":<int>} "\n\n"
//   token event  = "data: " {"i":<int>,"token":<string>} "\n\n"
//   end marker   = "data: [DONE]\n\n"
//
// JSON bodies are compact (no whitespace) with keys in the order shown.
// A conforming session is one first frame, L-1 token events (fewer on EOT),
// then the end marker.
inline constexpr std::string_view kDoneFrame = "data: [DONE]\n\n";

struct AssistRequest {
  std::string scene;
  std::string model_version_label;
  std::string device_class;
  std::string prefix;
  std::string content;
  std::string suffix;
  std::string request_id;

  friend bool operator==(const AssistRequest&, const AssistRequest&) = default;
};

std::string encode_request(const AssistRequest& request);
AssistRequest decode_request(std::string_view body);

struct FirstTokenFrame {
  std::string token;
  CompressedMask mask;
  TokenCount L = 1;

  friend bool operator==(const FirstTokenFrame&, const FirstTokenFrame&) = default;
};

struct StreamEvent {
  std::uint32_t index = 1;
  std::string token;
  bool terminal = false;  // followed by the end marker

  friend bool operator==(const StreamEvent&, const StreamEvent&) = default;
};

std::string encode_first_frame(const FirstTokenFrame& frame);
// Throws ProtocolError naming the offending field; mask container errors
// surface as CodecError.
FirstTokenFrame decode_first_frame(std::string_view bytes);

// Compact "token#mask_b64#L" form. Tokens containing '#' are rejected.
std::string encode_first_frame_compact(const FirstTokenFrame& frame);
FirstTokenFrame decode_first_frame_compact(std::string_view bytes);

// Event frame, plus the end marker when `terminal` is set.
std::string encode_stream_event(const StreamEvent& event);
// Inverse of encode_stream_event for one event (optionally followed by the
// end marker).
StreamEvent decode_stream_event(std::string_view bytes);

struct StreamEnd {
  friend bool operator==(const StreamEnd&, const StreamEnd&) = default;
};

// A frame the decoder could not accept. Decoding resumes at the next frame.
struct StreamFault {
  std::string field;
  std::string message;
};

using StreamItem = std::variant<FirstTokenFrame, StreamEvent, StreamEnd, StreamFault>;

// Incremental decoder over an SSE byte stream. Frames may be split across
// feed() calls arbitrarily. Single owner; not thread-safe.
class StreamDecoder {
 public:
  static constexpr std::size_t kMaxFrameBytes = 1 << 20;

  std::vector<StreamItem> feed(std::string_view bytes);

  bool saw_end() const { return saw_end_; }
  std::size_t fault_count() const { return faults_; }
  std::size_t buffered() const { return buffer_.size(); }

 private:
  StreamItem decode_frame(std::string_view frame);

  std::string buffer_;
  bool discarding_ = false;  // inside an oversized frame, skipping to "\n\n"
  bool saw_first_ = false;
  bool saw_end_ = false;
  std::uint32_t next_index_ = 1;
  std::size_t faults_ = 0;
};

}  // namespace pdd
