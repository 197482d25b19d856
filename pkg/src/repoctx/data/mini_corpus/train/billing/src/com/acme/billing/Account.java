package com.acme.billing;

import com.acme.billing.util.StringUtil;

public class Account extends BaseEntity {
    private final String owner;
    private Tier tier = Tier.FREE;

    public Account(String owner) {
        this.owner = StringUtil.trimToEmpty(owner);
    }

    public Tier getTier() {
        return tier;
    }

    public void upgrade(Tier next) {
        // only move upwards
        if (next.ordinal() > tier.ordinal()) {
            tier = next;
        }
    }

    public String getOwner() {
        return owner;
    }
}
