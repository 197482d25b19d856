package com.acme.billing;

import com.acme.billing.Account;
import com.acme.billing.Auth;
import java.util.List;

public class Subscription {
    private final Account account;
    private final String token = Auth.user("bearer");

    public Subscription(Account account) {
        this.account = account;
    }

    public Tier getTier() {
        return account.getTier();
    }

    public boolean isActive() {
        return Auth.isValid(token);
    }
}
