import * as tf from "@tensorflow/tfjs";
import { describe, expect, it } from "vitest";

import { MiniEncoder } from "../src/model";
import { padBatch } from "../src/tokenizer";
import { fixtureCorpus, testConfig } from "./helpers";
import { initializeForCorpus, scoreAll } from "../src/trainer";

const DIMS = { vocabSize: 50, dModel: 32, numLayers: 2, numHeads: 4, ffnDim: 64, maxTokens: 16 };

describe("model parameters", () => {
    it("same base id gives bit-identical initialization", () => {
        const a = new MiniEncoder(DIMS, "base-x");
        const b = new MiniEncoder(DIMS, "base-x");
        expect(a.parameterHash()).toBe(b.parameterHash());
        a.dispose();
        b.dispose();
    });

    it("different base id gives different parameters", () => {
        const a = new MiniEncoder(DIMS, "base-x");
        const b = new MiniEncoder(DIMS, "base-y");
        expect(a.parameterHash()).not.toBe(b.parameterHash());
        a.dispose();
        b.dispose();
    });

    it("export/import round-trips the exact parameter hash", () => {
        const a = new MiniEncoder(DIMS, "base-x");
        const b = new MiniEncoder(DIMS, "base-y");
        b.importWeights(a.exportWeights());
        expect(b.parameterHash()).toBe(a.parameterHash());
        a.dispose();
        b.dispose();
    });
});

describe("scoring", () => {
    it("emits one probability per document, inside (0,1), pairs summing to 1", () => {
        const state = initializeForCorpus(testConfig(), fixtureCorpus(25));
        state.trained = true;
        const scores = scoreAll(state);
        expect(scores).toHaveLength(25);
        for (const p of scores) {
            expect(p).toBeGreaterThan(0);
            expect(p).toBeLessThan(1);
        }
        // softmax by construction: P(irrelevant) = 1 - P(relevant) to fp error
        const { ids, mask } = padBatch(state.sequences.slice(0, 4));
        const probs = tf.softmax(
            state.model.clsLogits(tf.tensor2d(ids, undefined, "int32"), tf.tensor2d(mask))
        );
        const rows = probs.dataSync() as Float32Array;
        for (let r = 0; r < 4; r++) {
            expect(Math.abs(rows[2 * r] + rows[2 * r + 1] - 1.0)).toBeLessThan(1e-5);
        }
        state.model.dispose();
    });

    it("scoring twice with fixed state is identical", () => {
        const state = initializeForCorpus(testConfig(), fixtureCorpus(20));
        state.trained = true;
        expect(scoreAll(state)).toEqual(scoreAll(state));
        state.model.dispose();
    });

    it("rejects sequences longer than max_tokens", () => {
        const model = new MiniEncoder(DIMS, "base-x");
        const ids = tf.zeros([1, 17], "int32");
        const mask = tf.ones([1, 17]);
        expect(() => model.forward(ids, mask)).toThrow(/max_tokens/);
        model.dispose();
    });
});
