// ltstream/streaming.h
//
// Copyright 2026 The ltstream Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// \file
// Frame-by-frame evaluation. The time stack advances one frame per push()
// and keeps its outputs for reuse by a later pass. A depth head buffers at
// most tau+1 depth outputs per layer and emits the logits of frame t once
// every layer has seen its look-ahead (or once finish() pads the tail).
//
// Values are bit-identical to the batch forward in model.h.

#ifndef LTSTREAM_STREAMING_H_
#define LTSTREAM_STREAMING_H_

#include <cstddef>
#include <deque>
#include <vector>

#include "ltstream/model.h"

namespace ltstream {

class StreamingTimeStack {
 public:
  explicit StreamingTimeStack(const TimeLstmStack& stack);

  // Advances one frame; returns h_t^l for every layer.
  const std::vector<Tensor>& push(const Tensor& frame);

  std::size_t frames() const { return frames_; }
  // Number of per-frame stack evaluations so far.
  std::size_t evaluations() const { return evaluations_; }
  // Stored outputs, [layer][t].
  const std::vector<std::vector<Tensor>>& stored() const { return stored_; }
  // Stored outputs as [layer] of [T x proj].
  std::vector<Tensor> stored_matrices() const;

 private:
  const TimeLstmStack* stack_;
  std::vector<CellState> state_;
  std::vector<Tensor> last_;
  std::vector<std::vector<Tensor>> stored_;
  std::size_t frames_ = 0;
  std::size_t evaluations_ = 0;
};

struct Emission {
  std::size_t frame = 0;
  Tensor logits;
};

class StreamingHead {
 public:
  explicit StreamingHead(const DepthHead& head);

  // Feeds h_t^l (all layers) for the next frame; returns newly finished frames.
  std::vector<Emission> push(const std::vector<Tensor>& h);
  // End of stream: pads the tail and flushes every remaining frame.
  std::vector<Emission> finish();

  std::size_t frames_in() const { return frames_in_; }
  std::size_t frames_out() const { return frames_out_; }
  // Largest number of depth outputs held by any layer buffer so far.
  std::size_t peak_buffer() const { return peak_buffer_; }

 private:
  struct Partner {
    Tensor cell;
    Tensor embedding;
  };
  struct Layer {
    std::deque<Tensor> pending_h;  // time outputs waiting for their partner
    std::size_t next_step = 0;     // next frame to run the depth cell on
    std::deque<Tensor> g;          // depth outputs from frame `g_base` on
    std::deque<Tensor> c;
    std::size_t g_base = 0;
    std::deque<Partner> ready;     // partner for the layer above, from `ready_base`
    std::size_t ready_base = 0;
  };

  void advance(bool at_end, std::vector<Emission>& out);
  Partner embed(Layer& layer, std::size_t l, std::size_t last_frame);

  const DepthHead* head_;
  std::vector<Layer> layers_;
  std::size_t frames_in_ = 0;
  std::size_t frames_out_ = 0;
  std::size_t peak_buffer_ = 0;
  bool finished_ = false;
};

// Whole model streamed frame by frame.
class StreamingModel {
 public:
  explicit StreamingModel(const LayerTrajectoryModel& model);

  std::vector<Emission> push(const Tensor& frame);
  std::vector<Emission> finish();

  const StreamingTimeStack& time() const { return time_; }

 private:
  StreamingTimeStack time_;
  StreamingHead head_;
};

// Streams `features` row by row and reassembles [T x senones] logits.
Tensor stream_logits(const LayerTrajectoryModel& model, const Tensor& features);

}  // namespace ltstream

#endif  // LTSTREAM_STREAMING_H_
