/** Masked-LM example construction: each non-special position is masked
 * independently with probability maskProb and replaced by [MASK]; the
 * model is trained to recover the original id at those positions.
 */

import { CLS, MASK, PAD } from "./tokenizer";
import { Rng } from "./rng";

export interface MaskedExample {
    inputIds: number[];
    /** original id at masked positions, -1 elsewhere */
    labels: number[];
    nMaskable: number;
    nMasked: number;
}

export function maskTokens(ids: number[], maskProb: number, rng: Rng): MaskedExample {
    const inputIds = ids.slice();
    const labels = Array(ids.length).fill(-1);
    let nMaskable = 0;
    let nMasked = 0;
    for (let i = 0; i < ids.length; i++) {
        if (ids[i] === CLS || ids[i] === PAD) continue;
        nMaskable++;
        if (rng.next() < maskProb) {
            labels[i] = ids[i];
            inputIds[i] = MASK;
            nMasked++;
        }
    }
    return { inputIds, labels, nMaskable, nMasked };
}
