package com.acme.billing;

public enum Tier {
    FREE, BASIC, PREMIUM;

    public boolean isPaid() {
        return this != FREE;
    }
}
