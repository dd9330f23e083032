#!/usr/bin/env node
/** Entry point: serve the scoring protocol on stdio. */

import { serve } from "./server";

// stdout belongs to the protocol; anything libraries print must not leak
// into it. Route console noise to stderr before loading the backend.
console.log = console.error;
console.info = console.error;
console.warn = console.error;

serve(process.stdin, process.stdout, (code) => process.exit(code));
