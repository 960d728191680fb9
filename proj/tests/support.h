// ltstream/tests/support.h
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
// Test-side names for the library fixtures.

#ifndef LTSTREAM_TESTS_SUPPORT_H_
#define LTSTREAM_TESTS_SUPPORT_H_

#include "ltstream/fixtures.h"

namespace ltstream::testing {

using ltstream::diamond;
using ltstream::grad_instance;
using ltstream::GradInstance;
using ltstream::random_lattice;

}  // namespace ltstream::testing

#endif  // LTSTREAM_TESTS_SUPPORT_H_
