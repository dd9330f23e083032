import { describe, expect, it } from "vitest";

import { maskTokens } from "../src/masking";
import { Rng } from "../src/rng";
import { CLS, MASK, PAD } from "../src/tokenizer";

describe("masked-LM example construction", () => {
    it("masks 15% of tokens within 0.01 over 1e5+ samples", () => {
        const rng = new Rng(42);
        let maskable = 0;
        let masked = 0;
        while (maskable < 120_000) {
            const ids = [CLS, ...Array.from({ length: 40 }, (_, i) => 4 + (i % 300))];
            const example = maskTokens(ids, 0.15, rng);
            maskable += example.nMaskable;
            masked += example.nMasked;
        }
        const rate = masked / maskable;
        expect(maskable).toBeGreaterThanOrEqual(100_000);
        expect(rate).toBeGreaterThanOrEqual(0.14);
        expect(rate).toBeLessThanOrEqual(0.16);
    });

    it("never masks [CLS] or padding", () => {
        const rng = new Rng(7);
        for (let trial = 0; trial < 200; trial++) {
            const ids = [CLS, 5, 6, 7, PAD, PAD];
            const example = maskTokens(ids, 0.9, rng);
            expect(example.inputIds[0]).toBe(CLS);
            expect(example.inputIds[4]).toBe(PAD);
            expect(example.inputIds[5]).toBe(PAD);
        }
    });

    it("records the original id at masked positions and -1 elsewhere", () => {
        const rng = new Rng(3);
        const ids = [CLS, 10, 11, 12, 13, 14];
        const example = maskTokens(ids, 0.5, rng);
        for (let i = 0; i < ids.length; i++) {
            if (example.inputIds[i] === MASK) {
                expect(example.labels[i]).toBe(ids[i]);
            } else {
                expect(example.labels[i]).toBe(-1);
                expect(example.inputIds[i]).toBe(ids[i]);
            }
        }
    });
});
