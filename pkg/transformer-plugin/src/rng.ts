/** Deterministic PRNG so model init, masking and shuffling are reproducible. */

export function hashString(text: string): number {
    // FNV-1a 32-bit
    let h = 0x811c9dc5;
    for (let i = 0; i < text.length; i++) {
        h ^= text.charCodeAt(i);
        h = Math.imul(h, 0x01000193);
    }
    return h >>> 0;
}

export class Rng {
    private state: number;

    constructor(seed: number) {
        this.state = seed >>> 0 || 1;
    }

    /** mulberry32 */
    next(): number {
        this.state = (this.state + 0x6d2b79f5) >>> 0;
        let t = this.state;
        t = Math.imul(t ^ (t >>> 15), t | 1);
        t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
        return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
    }

    nextInt(bound: number): number {
        return Math.floor(this.next() * bound);
    }

    /** standard normal via Box-Muller */
    nextGaussian(): number {
        let u = 0;
        while (u === 0) u = this.next();
        const v = this.next();
        return Math.sqrt(-2.0 * Math.log(u)) * Math.cos(2.0 * Math.PI * v);
    }

    shuffle<T>(items: T[]): T[] {
        const out = items.slice();
        for (let i = out.length - 1; i > 0; i--) {
            const j = this.nextInt(i + 1);
            [out[i], out[j]] = [out[j], out[i]];
        }
        return out;
    }
}
